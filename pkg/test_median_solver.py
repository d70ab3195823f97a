#!/usr/bin/env python3
"""
Tests for the 1-median / p-median solvers and solution verification
Run with pytest or directly: python test_median_solver.py
"""

import math
import sys
from itertools import combinations

import numpy as np

from median_solver import (Infeasible, MedianProblem, MedianSolution, TooLarge,
                           problem_from_dict, problem_to_dict, solution_from_dict,
                           solution_to_dict, solve_1median, solve_pmedian, solve_pmedian_exact,
                           solve_pmedian_interchange, verify_solution)

PATH_D = [[0, 1, 2], [1, 0, 1], [2, 1, 0]]


def _expect(exc_type, fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except exc_type as e:
        return e
    raise AssertionError(f"expected {exc_type.__name__}")


def _random_problem(rng, max_i=50, max_j=30, p=1, integer=True) -> MedianProblem:
    i = int(rng.integers(1, max_i + 1))
    j = int(rng.integers(max(p, 1), max_j + 1))
    if integer:
        w = rng.integers(1, 20, size=i).astype(float)
        d = rng.integers(0, 1000, size=(i, j)).astype(float)
    else:
        w = rng.uniform(0.1, 10.0, size=i)
        d = rng.uniform(0.0, 5000.0, size=(i, j))
    return MedianProblem(demand_weights=w, d=d, p=p)


def _subset_cost(prob: MedianProblem, subset) -> float:
    d = prob.d[:, list(subset)].min(axis=1)
    return math.fsum(prob.demand_weights * d)


def _brute_force_1median(prob: MedianProblem):
    costs = [_subset_cost(prob, (j,)) for j in range(prob.num_candidates)]
    best = min(range(len(costs)), key=lambda j: (costs[j], j))
    return best, costs[best]


# ===== PROBLEM VALIDATION =====

def test_problem_validation():
    _expect(ValueError, MedianProblem, [1.0, 2.0], [[1.0]], 1)
    _expect(ValueError, MedianProblem, [0.0], [[1.0]], 1)
    _expect(ValueError, MedianProblem, [-1.0, 2.0], [[1.0], [2.0]], 1)
    _expect(ValueError, MedianProblem, [1.0], [[1.0, 2.0]], 3)
    _expect(ValueError, MedianProblem, [1.0], [[-1.0]], 1)


# ===== 1-MEDIAN =====

def test_single_candidate_forced():
    prob = MedianProblem([2.0, 3.0], [[10.0], [20.0]], 1)
    sol = solve_1median(prob)
    assert sol.open == (0,)
    assert sol.cost == 80.0
    assert sol.assign == [0, 0]


def test_path_graph_center():
    sol = solve_1median(MedianProblem([1.0, 1.0, 1.0], PATH_D, 1))
    assert sol.open == (1,)
    assert sol.cost == 2.0


def test_weight_scaling_keeps_site():
    sol = solve_1median(MedianProblem([10.0, 10.0, 10.0], PATH_D, 1))
    assert sol.open == (1,)
    assert sol.cost == 20.0


def test_tie_goes_to_smallest_candidate():
    sol = solve_1median(MedianProblem([1.0, 1.0], [[0, 1], [1, 0]], 1))
    assert sol.open == (0,)


def test_unreachable_candidates_skipped():
    d = [[math.inf, 5.0], [1.0, 5.0]]
    sol = solve_1median(MedianProblem([1.0, 1.0], d, 1))
    assert sol.open == (1,)
    # unreachable zero-weight demand does not disqualify a candidate
    sol = solve_1median(MedianProblem([0.0, 1.0], d, 1))
    assert sol.open == (0,)
    assert sol.cost == 1.0


def test_no_feasible_candidate():
    _expect(Infeasible, solve_1median, MedianProblem([1.0, 1.0], [[math.inf, 1.0], [1.0, math.inf]], 1))


def test_1median_matches_exhaustive_scan():
    rng = np.random.default_rng(7)
    for trial in range(200):
        prob = _random_problem(rng, integer=(trial % 2 == 0))
        best, cost = _brute_force_1median(prob)
        sol = solve_1median(prob)
        assert sol.open == (best,), f"trial {trial}"
        assert sol.cost == cost, f"trial {trial}"

        scaled = MedianProblem(prob.demand_weights * 10, prob.d, 1)
        if trial % 2 == 0:
            assert solve_1median(scaled).open == sol.open, f"trial {trial}"


# ===== EXACT P-MEDIAN =====

def test_exact_saturated():
    prob = MedianProblem([1.0, 1.0, 1.0], PATH_D, 3)
    sol = solve_pmedian_exact(prob)
    assert sol.open == (0, 1, 2)
    assert sol.assign == [0, 1, 2]
    assert sol.cost == 0.0


def test_exact_p1_matches_1median():
    rng = np.random.default_rng(11)
    for trial in range(100):
        prob = _random_problem(rng, max_i=30, max_j=15)
        a, b = solve_pmedian_exact(prob), solve_1median(prob)
        assert (a.open, a.cost, a.assign) == (b.open, b.cost, b.assign), f"trial {trial}"


def test_exact_beats_every_subset():
    rng = np.random.default_rng(3)
    prob = MedianProblem(rng.uniform(0.5, 5.0, size=12), rng.uniform(0, 1000, size=(12, 6)), 2)
    sol = solve_pmedian_exact(prob)
    subsets = list(combinations(range(6), 2))
    assert len(subsets) == 15
    assert all(sol.cost <= _subset_cost(prob, s) for s in subsets)
    assert verify_solution(prob, sol)


def test_exact_cap():
    prob = MedianProblem(np.ones(5), np.ones((5, 30)), 10)
    _expect(TooLarge, solve_pmedian_exact, prob, 1000)


def test_zero_weight_demand_never_changes_open_sites():
    rng = np.random.default_rng(17)
    for trial in range(50):
        p = 1 + trial % 3
        prob = _random_problem(rng, max_i=25, max_j=10, p=p, integer=trial % 2 == 0)
        ghosts = int(rng.integers(1, 6))
        ghost_d = rng.uniform(0.0, 5000.0, size=(ghosts, prob.num_candidates))
        ghost_d[rng.random(ghost_d.shape) < 0.3] = math.inf
        padded = MedianProblem(np.concatenate([prob.demand_weights, np.zeros(ghosts)]),
                               np.vstack([prob.d, ghost_d]), p)
        a, b = solve_pmedian_exact(prob), solve_pmedian_exact(padded)
        assert (a.open, a.cost) == (b.open, b.cost), f"trial {trial}"
        if p == 1:
            assert solve_1median(padded).open == solve_1median(prob).open


def test_extra_candidate_never_raises_cost():
    rng = np.random.default_rng(23)
    for trial in range(50):
        p = 1 + trial % 3
        prob = _random_problem(rng, max_i=25, max_j=9, p=p, integer=trial % 2 == 0)
        extra = rng.uniform(0.0, 1000.0, size=(prob.num_demand, 1))
        wider = MedianProblem(prob.demand_weights, np.hstack([prob.d, extra]), p)
        assert solve_pmedian_exact(wider).cost <= solve_pmedian_exact(prob).cost, f"trial {trial}"


# ===== INTERCHANGE =====

def test_interchange_p1_matches_1median():
    rng = np.random.default_rng(5)
    for trial in range(50):
        prob = _random_problem(rng, max_i=30, max_j=20)
        a = solve_pmedian_interchange(prob, rng_seed=trial)
        b = solve_1median(prob)
        assert (a.open, a.cost) == (b.open, b.cost), f"trial {trial}"


def test_interchange_close_to_exact():
    rng = np.random.default_rng(17)
    within = 0
    for trial in range(100):
        p = int(rng.integers(1, 4))
        j = int(rng.integers(p, 13))
        i = int(rng.integers(p, 25))
        prob = MedianProblem(rng.uniform(0.5, 5.0, size=i), rng.uniform(0, 1000, size=(i, j)), p)
        heuristic = solve_pmedian_interchange(prob, rng_seed=trial)
        exact = solve_pmedian_exact(prob)
        assert heuristic.cost >= exact.cost - 1e-9
        assert verify_solution(prob, heuristic)
        if heuristic.cost <= exact.cost * 1.05 + 1e-9:
            within += 1
    assert within >= 95, f"only {within}/100 within 5%"


def test_interchange_optimal_start_unchanged():
    seed, j, p = 9, 8, 3
    start = tuple(sorted(int(k) for k in np.random.default_rng(seed).choice(j, size=p, replace=False)))
    # one demand point sitting on each start site, far from everything else
    d = np.full((p, j), 100.0)
    for row, site in enumerate(start):
        d[row, site] = 0.0
    sol = solve_pmedian_interchange(MedianProblem(np.ones(p), d, p), rng_seed=seed)
    assert sol.open == start
    assert sol.cost == 0.0


def test_interchange_deterministic():
    rng = np.random.default_rng(21)
    prob = MedianProblem(rng.uniform(0.5, 5.0, size=20), rng.uniform(0, 1000, size=(20, 10)), 3)
    a = solve_pmedian_interchange(prob, rng_seed=4)
    b = solve_pmedian_interchange(prob, rng_seed=4)
    assert (a.open, a.assign, a.cost) == (b.open, b.assign, b.cost)


def test_dispatch():
    prob = MedianProblem([1.0, 1.0, 1.0], PATH_D, 1)
    assert solve_pmedian(prob).open == (1,)
    prob = MedianProblem([1.0, 1.0, 1.0], PATH_D, 2)
    assert solve_pmedian(prob).cost == solve_pmedian_exact(prob).cost
    big = MedianProblem(np.ones(5), np.arange(150, dtype=float).reshape(5, 30), 10)
    assert verify_solution(big, solve_pmedian(big, cap=1000))


# ===== VERIFICATION =====

def test_verify_accepts_solver_output():
    prob = MedianProblem([1.0, 2.0, 3.0], PATH_D, 1)
    assert verify_solution(prob, solve_1median(prob)).ok


def test_verify_flags_open_count():
    prob = MedianProblem([1.0, 1.0, 1.0], PATH_D, 1)
    check = verify_solution(prob, MedianSolution(open=(0, 1), assign=[0, 1, 1], cost=1.0))
    assert not check
    assert "open-count constraint violated: 2 sites open, exactly p=1 required" in check.reasons


def test_verify_flags_closed_assignment():
    prob = MedianProblem([1.0, 1.0, 1.0], PATH_D, 1)
    check = verify_solution(prob, MedianSolution(open=(1,), assign=[1, 2, 1], cost=2.0))
    assert not check
    assert check.reasons == ["closed-assignment constraint violated: demand 1 assigned to closed candidate 2"]


def test_verify_flags_cost_and_nearest():
    prob = MedianProblem([1.0, 1.0, 1.0], PATH_D, 2)
    check = verify_solution(prob, MedianSolution(open=(0, 2), assign=[0, 0, 2], cost=1.0))
    assert check.ok
    check = verify_solution(prob, MedianSolution(open=(0, 2), assign=[0, 0, 0], cost=3.0))
    assert any(r.startswith("not-nearest") for r in check.reasons)
    check = verify_solution(prob, MedianSolution(open=(0, 2), assign=[0, 0, 2], cost=1.5))
    assert any(r.startswith("cost-mismatch") for r in check.reasons)


# ===== JSON SHAPE =====

def test_dict_shape_keeps_infinity():
    prob = MedianProblem([1.0, 0.0], [[1.0, math.inf], [math.inf, 2.0]], 1)
    data = problem_to_dict(prob)
    assert data["distances"][0][1] == "inf"
    again = problem_from_dict(data)
    assert np.array_equal(again.d, prob.d) and again.p == 1
    sol = solve_1median(prob)
    assert solution_from_dict(solution_to_dict(sol)) == sol


if __name__ == "__main__":
    tests = [(name, fn) for name, fn in sorted(globals().items())
             if name.startswith("test_") and callable(fn)]
    failed = 0
    for name, fn in tests:
        try:
            fn()
            print(f"✅ {name}")
        except Exception as e:
            failed += 1
            print(f"❌ {name}: {e}")
    print(f"\n{len(tests) - failed}/{len(tests)} passed")
    sys.exit(1 if failed else 0)
