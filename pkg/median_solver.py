#!/usr/bin/env python3
"""
Median Solver - weighted p-median over a demand x candidate distance matrix
Exact scan for p=1, exhaustive enumeration for small p, and a vertex
substitution (interchange) local search for everything else.
"""

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Sequence, Tuple

import numpy as np

from config import DEFAULT_EXACT_CAP

logger = logging.getLogger(__name__)


class Infeasible(RuntimeError):
    """No candidate (subset) reaches every positively weighted demand point"""


class TooLarge(RuntimeError):
    """Exhaustive enumeration would exceed the configured subset cap"""


@dataclass
class MedianProblem:
    demand_weights: np.ndarray  # h_i, shape (I,)
    d: np.ndarray               # meters, shape (I, J); inf = unreachable
    p: int = 1

    def __post_init__(self):
        self.demand_weights = np.asarray(self.demand_weights, dtype=float)
        self.d = np.asarray(self.d, dtype=float)
        if self.d.ndim == 1:
            self.d = self.d.reshape(-1, 1)
        w, d = self.demand_weights, self.d

        if w.ndim != 1 or d.ndim != 2 or d.shape[0] != w.shape[0]:
            raise ValueError(f"weights {w.shape} and distances {d.shape} do not line up")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("demand weights must be finite and >= 0")
        if not np.any(w > 0):
            raise ValueError("at least one demand weight must be positive")
        if np.any(np.isnan(d)) or np.any(d < 0):
            raise ValueError("distances must be >= 0 (inf allowed for unreachable pairs)")
        if isinstance(self.p, bool) or int(self.p) != self.p or not 1 <= self.p <= d.shape[1]:
            raise ValueError(f"p must be an integer in [1, {d.shape[1]}], got {self.p}")
        self.p = int(self.p)

    @property
    def num_demand(self) -> int:
        return self.d.shape[0]

    @property
    def num_candidates(self) -> int:
        return self.d.shape[1]


@dataclass
class MedianSolution:
    open: Tuple[int, ...]  # X_j = 1
    assign: List[int]      # demand i -> candidate j (Y_ij = 1)
    cost: float            # sum of h_i * d_ij


@dataclass
class Verification:
    ok: bool
    reasons: List[str]

    def __bool__(self) -> bool:
        return self.ok


def _subset_cost(prob: MedianProblem, subset: Sequence[int]) -> Tuple[float, np.ndarray]:
    """Cost of opening `subset` (sorted) with every demand at its nearest open site"""
    sub = prob.d[:, list(subset)]
    local = np.argmin(sub, axis=1)  # first minimum -> smallest candidate index
    nearest = np.asarray(subset)[local]
    dist = sub[np.arange(prob.num_demand), local]
    positive = prob.demand_weights > 0
    if np.any(np.isinf(dist[positive])):
        return math.inf, nearest
    return math.fsum(prob.demand_weights[positive] * dist[positive]), nearest


def _solution(subset: Tuple[int, ...], cost: float, nearest: np.ndarray) -> MedianSolution:
    return MedianSolution(open=tuple(int(j) for j in subset),
                          assign=[int(j) for j in nearest], cost=cost)


def solve_1median(prob: MedianProblem) -> MedianSolution:
    """Best single site; candidates that miss positive demand are skipped, ties -> smallest index"""
    if prob.p != 1:
        raise ValueError(f"solve_1median needs p=1, got p={prob.p}")
    best = None
    for j in range(prob.num_candidates):
        cost, nearest = _subset_cost(prob, (j,))
        if math.isinf(cost):
            continue
        if best is None or cost < best[0]:
            best = (cost, (j,), nearest)
    if best is None:
        raise Infeasible("no candidate reaches every positively weighted demand point")
    return _solution(best[1], best[0], best[2])


def solve_pmedian_exact(prob: MedianProblem, cap: int = DEFAULT_EXACT_CAP) -> MedianSolution:
    """
    Exhaustive p-median

    Every p-subset is evaluated with nearest-open assignment; the cheapest wins,
    ties going to the lexicographically smallest subset.
    """
    total = math.comb(prob.num_candidates, prob.p)
    if total > cap:
        raise TooLarge(f"C({prob.num_candidates}, {prob.p}) = {total} subsets exceeds cap {cap}; "
                       f"use the interchange heuristic")
    best = None
    for subset in combinations(range(prob.num_candidates), prob.p):
        cost, nearest = _subset_cost(prob, subset)
        if math.isinf(cost):
            continue
        if best is None or cost < best[0]:
            best = (cost, subset, nearest)
    if best is None:
        raise Infeasible(f"no {prob.p}-subset reaches every positively weighted demand point")
    return _solution(best[1], best[0], best[2])


def solve_pmedian_interchange(prob: MedianProblem, rng_seed: int = 0) -> MedianSolution:
    """
    Vertex substitution local search

    Starts from a seeded random p-subset and applies the best improving single
    swap (open <-> closed) until none improves. Moves are ranked by
    (cost, subset), so the search is deterministic and, for p=1, ends at the
    same site as solve_1median.
    """
    rng = np.random.default_rng(rng_seed)
    start = rng.choice(prob.num_candidates, size=prob.p, replace=False)
    current = tuple(sorted(int(j) for j in start))

    cache: Dict[Tuple[int, ...], Tuple[float, np.ndarray]] = {}

    def evaluate(subset):
        if subset not in cache:
            cache[subset] = _subset_cost(prob, subset)
        return cache[subset]

    swaps = 0
    while True:
        best_key = (evaluate(current)[0], current)
        open_set = set(current)
        for leaving in current:
            for entering in range(prob.num_candidates):
                if entering in open_set:
                    continue
                subset = tuple(sorted((open_set - {leaving}) | {entering}))
                key = (evaluate(subset)[0], subset)
                if key < best_key:
                    best_key = key
        if best_key[1] == current:
            break
        current = best_key[1]
        swaps += 1

    cost, nearest = evaluate(current)
    if math.isinf(cost):
        raise Infeasible("interchange search found no subset reaching every positively weighted demand point")
    logger.debug(f"Interchange converged after {swaps} swap(s), {len(cache)} subsets evaluated")
    return _solution(current, cost, nearest)


def solve_pmedian(prob: MedianProblem, cap: int = DEFAULT_EXACT_CAP,
                  rng_seed: int = 0) -> MedianSolution:
    """Pick the exact solver when it is affordable, the interchange heuristic otherwise"""
    if prob.p == 1:
        return solve_1median(prob)
    if math.comb(prob.num_candidates, prob.p) <= cap:
        return solve_pmedian_exact(prob, cap)
    logger.info(f"C({prob.num_candidates}, {prob.p}) exceeds {cap}; using interchange heuristic")
    return solve_pmedian_interchange(prob, rng_seed)


def verify_solution(prob: MedianProblem, sol: MedianSolution) -> Verification:
    """
    Check a solution against the p-median constraints

    Each reason starts with a short code naming the violated constraint:
    open-count (exactly p sites open), invalid-site, assignment-length
    (one assignment per demand point), closed-assignment (demand served
    only by open sites), not-nearest, unreachable, cost-mismatch.
    """
    reasons = []
    J, I = prob.num_candidates, prob.num_demand

    open_sites = [int(j) for j in sol.open]
    bad_sites = [j for j in open_sites if not 0 <= j < J]
    if bad_sites:
        reasons.append(f"invalid-site constraint violated: open candidates {bad_sites} out of range")
    if len(set(open_sites)) != prob.p or len(open_sites) != prob.p:
        reasons.append(f"open-count constraint violated: {len(open_sites)} sites open, "
                       f"exactly p={prob.p} required")
    if len(sol.assign) != I:
        reasons.append(f"assignment-length constraint violated: {len(sol.assign)} assignments "
                       f"for {I} demand points")
        return Verification(False, reasons)

    open_set = set(open_sites)
    valid_open = sorted(j for j in open_set if 0 <= j < J)
    positive = prob.demand_weights > 0
    for i, j in enumerate(sol.assign):
        if j not in open_set:
            reasons.append(f"closed-assignment constraint violated: demand {i} assigned "
                           f"to closed candidate {j}")
            continue
        if not 0 <= j < J:
            continue
        nearest = min(prob.d[i, k] for k in valid_open)
        if prob.d[i, j] > nearest:
            reasons.append(f"not-nearest constraint violated: demand {i} at {prob.d[i, j]} m, "
                           f"nearest open at {nearest} m")
        if positive[i] and math.isinf(prob.d[i, j]):
            reasons.append(f"unreachable constraint violated: demand {i} cannot reach candidate {j}")

    if not reasons:
        assigned = np.asarray(sol.assign)
        dist = prob.d[np.arange(I), assigned]
        if np.any(np.isinf(dist[positive])):
            cost = math.inf
        else:
            cost = math.fsum(prob.demand_weights[positive] * dist[positive])
        if cost != sol.cost:
            reasons.append(f"cost-mismatch: reported {sol.cost}, recomputed {cost}")

    return Verification(not reasons, reasons)


def _encode(value: float):
    return "inf" if math.isinf(value) else float(value)


def _decode(value) -> float:
    return math.inf if value == "inf" else float(value)


def problem_to_dict(prob: MedianProblem) -> Dict:
    return {
        "weights": [float(w) for w in prob.demand_weights],
        "distances": [[_encode(v) for v in row] for row in prob.d],
        "p": prob.p,
    }


def problem_from_dict(data: Dict) -> MedianProblem:
    return MedianProblem(
        demand_weights=np.array(data["weights"], dtype=float),
        d=np.array([[_decode(v) for v in row] for row in data["distances"]], dtype=float),
        p=int(data["p"]),
    )


def solution_to_dict(sol: MedianSolution) -> Dict:
    return {"open": list(sol.open), "assign": list(sol.assign), "cost": _encode(sol.cost)}


def solution_from_dict(data: Dict) -> MedianSolution:
    return MedianSolution(open=tuple(int(j) for j in data["open"]),
                          assign=[int(j) for j in data["assign"]],
                          cost=_decode(data["cost"]))
