#!/usr/bin/env python3
"""
Hub Optimizer - network K-Means with exact 1-median centroid updates
Assigns demand to the nearest hub by road distance, moves each hub to the
best candidate site of its cluster, and repeats until hubs settle.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from candidate_grid import CandidateSite, PlanarFrame, generate_candidates
from config import (DEFAULT_CUTOFF_M, DEFAULT_GRID_RES_M, DEFAULT_MAX_ITER,
                    DEFAULT_MAX_SNAP_M, DEFAULT_SNAP_POLICY, SNAP_POLICIES)
from demand import DemandPoint
from median_solver import MedianProblem, MedianSolution, solve_1median
from road_graph import GeoPoint, RoadGraph, great_circle_m, od_matrix, snap_to_node

logger = logging.getLogger(__name__)

CUTOFF_MET = "CutoffMet"
MAX_ITERATIONS = "MaxIterations"


class UnreachableDemand(RuntimeError):
    """Demand points no hub can reach by road"""

    def __init__(self, message: str, demand_ids: Sequence[int] = ()):
        self.demand_ids = list(demand_ids)
        super().__init__(message)


class OptimizerError(RuntimeError):
    """Invalid optimizer input or configuration"""


@dataclass
class OptimizerConfig:
    max_iter: int = DEFAULT_MAX_ITER
    cutoff_m: float = DEFAULT_CUTOFF_M
    grid_res_m: float = DEFAULT_GRID_RES_M
    max_snap_m: float = DEFAULT_MAX_SNAP_M
    snap_policy: str = DEFAULT_SNAP_POLICY

    def validate(self):
        if isinstance(self.max_iter, bool) or int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise OptimizerError(f"max_iter must be an integer >= 1, got {self.max_iter}")
        if not (math.isfinite(self.cutoff_m) and self.cutoff_m >= 0):
            raise OptimizerError(f"cutoff_m must be >= 0, got {self.cutoff_m}")
        if not (math.isfinite(self.grid_res_m) and self.grid_res_m > 0):
            raise OptimizerError(f"grid_res_m must be > 0, got {self.grid_res_m}")
        if not self.max_snap_m > 0:
            raise OptimizerError(f"max_snap_m must be > 0, got {self.max_snap_m}")
        if self.snap_policy not in SNAP_POLICIES:
            raise OptimizerError(f"snap_policy must be one of {SNAP_POLICIES}, got {self.snap_policy!r}")


@dataclass
class ClusterState:
    index: int
    centroid_node: int
    members: List[int] = field(default_factory=list)


@dataclass
class Assignment:
    """Clusters for one set of hubs plus the hub -> demand distances behind them"""
    clusters: List[ClusterState]
    distances: np.ndarray  # (K, I) meters from hub j to demand i
    labels: List[int]      # demand -> cluster, -1 when dropped
    dropped: List[int]


@dataclass
class IterationStats:
    iteration: int
    objective_m: float
    centroid_moves_m: List[float]
    candidates_evaluated: int
    hubs: List[int] = field(default_factory=list)
    assignment: List[int] = field(default_factory=list)


@dataclass
class HubSite:
    cluster: int
    node: int
    pos: GeoPoint


@dataclass
class HubSummary:
    cluster: int
    node: int
    members: int
    deliveries: int
    weight: float
    mean_distance_m: Optional[float]


@dataclass
class OptimizationReport:
    baseline_objective_m: float
    iterations: List[IterationStats]
    final_hubs: List[HubSite]
    final_assignment: List[int]
    stop_reason: str
    final_objective_m: float
    initial_hubs: List[HubSite] = field(default_factory=list)
    dropped_demand: List[int] = field(default_factory=list)
    hub_summaries: List[HubSummary] = field(default_factory=list)
    restarts: List[Dict] = field(default_factory=list)


@dataclass
class BaselineReport:
    objective_m: float
    hubs: List[HubSite]
    assignment: List[int]
    dropped_demand: List[int]
    hub_summaries: List[HubSummary]

    @property
    def cluster_sizes(self) -> List[int]:
        return [summary.members for summary in self.hub_summaries]


@dataclass
class HubShift:
    from_cluster: int
    from_node: int
    to_cluster: Optional[int]
    to_node: Optional[int]
    distance_m: float


def assign_to_nearest_hub(g: RoadGraph, demand: Sequence[DemandPoint], hubs: Sequence[int],
                          snap_policy: str = "strict") -> Assignment:
    """
    Attach every demand point to the hub with the shortest hub -> delivery road distance

    Ties go to the lowest cluster index. Points no hub can reach raise
    UnreachableDemand in strict mode and are dropped in lenient mode.
    """
    if not hubs:
        raise OptimizerError("at least one hub is required")
    if not demand:
        raise OptimizerError("at least one demand point is required")

    distances = od_matrix(g, hubs, [p.node for p in demand]).d
    nearest = np.argmin(distances, axis=0)
    best = distances[nearest, np.arange(len(demand))]
    unreachable = [int(i) for i in np.flatnonzero(np.isinf(best))]

    if len(unreachable) == len(demand):
        raise UnreachableDemand("no demand point is reachable from any hub", unreachable)
    if unreachable:
        if snap_policy == "strict":
            raise UnreachableDemand(
                f"{len(unreachable)} demand point(s) unreachable from every hub "
                f"(first: demand {unreachable[0]})", unreachable)
        logger.warning(f"Dropping {len(unreachable)} demand point(s) unreachable from every hub")

    clusters = [ClusterState(index=j, centroid_node=int(node)) for j, node in enumerate(hubs)]
    labels = []
    dropped = set(unreachable)
    for i in range(len(demand)):
        if i in dropped:
            labels.append(-1)
            continue
        j = int(nearest[i])
        clusters[j].members.append(i)
        labels.append(j)
    return Assignment(clusters=clusters, distances=distances, labels=labels, dropped=unreachable)


def objective(clusters: Sequence[ClusterState], d_hub_to_demand: np.ndarray,
              demand: Sequence[DemandPoint]) -> float:
    """Weighted mean hub -> delivery road distance over all clustered demand"""
    terms = []
    weights = []
    for cluster in clusters:
        for i in cluster.members:
            distance = d_hub_to_demand[cluster.index, i]
            if not math.isfinite(distance):
                raise OptimizerError(f"demand {i} is unreachable from hub of cluster {cluster.index}")
            terms.append(demand[i].weight * distance)
            weights.append(demand[i].weight)
    total = math.fsum(weights)
    if total <= 0:
        raise OptimizerError("objective undefined: total demand weight is zero")
    return math.fsum(terms) / total


def update_centroid(g: RoadGraph, frame: PlanarFrame, cluster: ClusterState,
                    demand: Sequence[DemandPoint],
                    cfg: OptimizerConfig) -> Tuple[int, MedianSolution, List[CandidateSite]]:
    """
    Move a cluster's hub to the exact 1-median of its candidate sites

    The incumbent centroid is always a candidate, so the returned cost never
    exceeds the incumbent's. Candidates that cannot reach every member,
    zero-weight members included, are dropped; the incumbent reaches all of
    them whenever the previous assignment succeeded.
    """
    if not cluster.members:
        raise OptimizerError(f"cluster {cluster.index} has no members")
    members = [demand[i] for i in cluster.members]
    candidates = generate_candidates(g, frame, members, cfg.grid_res_m,
                                     cluster.centroid_node, cfg.max_snap_m)
    nodes = [site.node for site in candidates]
    d = od_matrix(g, nodes, [p.node for p in members]).d.T
    reach_all = np.all(np.isfinite(d), axis=0)
    if reach_all.any() and not reach_all.all():
        keep = np.flatnonzero(reach_all)
        candidates = [candidates[j] for j in keep]
        nodes = [nodes[j] for j in keep]
        d = d[:, keep]
    solution = solve_1median(MedianProblem(
        demand_weights=np.array([p.weight for p in members], dtype=float), d=d, p=1))
    return nodes[solution.open[0]], solution, candidates


def centroid_displacement(old: int, new: int, g: RoadGraph) -> float:
    """Great-circle distance between two nodes (0 for the same node)"""
    if old == new:
        g.check_node(old)
        return 0.0
    return great_circle_m(g.node_pos(old), g.node_pos(new))


def _repair_empty_clusters(g: RoadGraph, demand: Sequence[DemandPoint], hubs: List[int],
                           assignment: Assignment, snap_policy: str) -> Tuple[List[int], Assignment]:
    """Reseed empty clusters at the demand points farthest from their hubs, then reassign"""
    used = set()
    for _ in range(len(hubs) + 1):
        empty = [c.index for c in assignment.clusters if not c.members]
        if not empty:
            break
        reseeded = False
        for j in empty:
            farthest = None
            for i, label in enumerate(assignment.labels):
                if label < 0 or i in used:
                    continue
                distance = assignment.distances[label, i]
                if distance > 0 and (farthest is None or distance > farthest[0]):
                    farthest = (distance, i)
            if farthest is None:
                logger.warning(f"Cluster {j} is empty and no demand point is left to reseed it")
                continue
            distance, i = farthest
            used.add(i)
            logger.info(f"Cluster {j} empty: reseeded at demand {i} "
                        f"({distance:.0f} m from its hub)")
            hubs[j] = demand[i].node
            reseeded = True
        if not reseeded:
            break
        assignment = assign_to_nearest_hub(g, demand, hubs, snap_policy)
    return hubs, assignment


def _hub_summaries(assignment: Assignment, demand: Sequence[DemandPoint]) -> List[HubSummary]:
    summaries = []
    for cluster in assignment.clusters:
        weight = math.fsum(demand[i].weight for i in cluster.members)
        mean = None
        if weight > 0:
            mean = math.fsum(demand[i].weight * assignment.distances[cluster.index, i]
                             for i in cluster.members) / weight
        summaries.append(HubSummary(
            cluster=cluster.index,
            node=cluster.centroid_node,
            members=len(cluster.members),
            deliveries=sum(demand[i].count for i in cluster.members),
            weight=weight,
            mean_distance_m=mean,
        ))
    return summaries


def _hub_sites(g: RoadGraph, hubs: Sequence[int]) -> List[HubSite]:
    return [HubSite(cluster=j, node=int(node), pos=g.nodes[node].pos) for j, node in enumerate(hubs)]


def run(g: RoadGraph, frame: PlanarFrame, demand: Sequence[DemandPoint],
        initial_hub_points: Sequence[GeoPoint], cfg: OptimizerConfig) -> OptimizationReport:
    """
    Network K-Means with 1-median centroid updates

    Each iteration assigns demand to the nearest hub, repairs empty clusters,
    records the objective, then moves every hub to the 1-median of its
    cluster. Stops when the largest hub move is below the cutoff or after
    max_iter iterations.

    Args:
        g: Road graph
        frame: Planar frame for candidate grids
        demand: Demand points (weights already set for the phase)
        initial_hub_points: Starting hub positions; K = len(initial_hub_points)
        cfg: Optimizer configuration

    Returns:
        OptimizationReport with per-iteration statistics and the final hubs
    """
    cfg.validate()
    if not demand:
        raise OptimizerError("no demand points to cluster")
    if not initial_hub_points:
        raise OptimizerError("at least one initial hub is required")
    if len(initial_hub_points) > len(demand):
        raise OptimizerError(f"{len(initial_hub_points)} hubs for only {len(demand)} demand points")

    hubs = [snap_to_node(g, p, cfg.max_snap_m) for p in initial_hub_points]
    initial_hubs = _hub_sites(g, hubs)
    logger.info(f"Optimizing {len(hubs)} hubs over {len(demand)} demand points "
                f"(max {cfg.max_iter} iterations, cutoff {cfg.cutoff_m} m)")

    iterations: List[IterationStats] = []
    stop_reason = MAX_ITERATIONS
    for t in range(1, cfg.max_iter + 1):
        assignment = assign_to_nearest_hub(g, demand, hubs, cfg.snap_policy)
        hubs, assignment = _repair_empty_clusters(g, demand, hubs, assignment, cfg.snap_policy)
        value = objective(assignment.clusters, assignment.distances, demand)

        new_hubs = list(hubs)
        moves = []
        evaluated = 0
        for cluster in assignment.clusters:
            if not cluster.members or not any(demand[i].weight > 0 for i in cluster.members):
                moves.append(0.0)
                continue
            node, _, candidates = update_centroid(g, frame, cluster, demand, cfg)
            evaluated += len(candidates)
            new_hubs[cluster.index] = node
            moves.append(centroid_displacement(hubs[cluster.index], node, g))

        iterations.append(IterationStats(
            iteration=t,
            objective_m=value,
            centroid_moves_m=moves,
            candidates_evaluated=evaluated,
            hubs=[int(h) for h in hubs],
            assignment=list(assignment.labels),
        ))
        logger.info(f"Iteration {t}: {value:.1f} m per delivery, max hub move {max(moves):.1f} m, "
                    f"{evaluated} candidates")
        hubs = new_hubs
        if max(moves) < cfg.cutoff_m:
            stop_reason = CUTOFF_MET
            break

    final = assign_to_nearest_hub(g, demand, hubs, cfg.snap_policy)
    final_value = objective(final.clusters, final.distances, demand)
    logger.info(f"Stopped ({stop_reason}) after {len(iterations)} iteration(s): "
                f"{iterations[0].objective_m:.1f} -> {final_value:.1f} m per delivery")

    return OptimizationReport(
        baseline_objective_m=iterations[0].objective_m,
        iterations=iterations,
        final_hubs=_hub_sites(g, hubs),
        final_assignment=list(final.labels),
        stop_reason=stop_reason,
        final_objective_m=final_value,
        initial_hubs=initial_hubs,
        dropped_demand=list(final.dropped),
        hub_summaries=_hub_summaries(final, demand),
    )


def run_with_restarts(g: RoadGraph, frame: PlanarFrame, demand: Sequence[DemandPoint],
                      initial_hub_points: Sequence[GeoPoint], cfg: OptimizerConfig,
                      restarts: int = 0, seed: int = 0) -> OptimizationReport:
    """
    Best of several runs

    Restart 0 starts from the given hubs; restart r >= 1 starts from K
    distinct demand positions drawn with a generator seeded by (seed, r).
    Lowest final objective wins, ties to the lowest restart.
    """
    best = run(g, frame, demand, initial_hub_points, cfg)
    if restarts <= 0:
        return best

    k = len(initial_hub_points)
    summary = [{"restart": 0, "final_objective_m": best.final_objective_m,
                "stop_reason": best.stop_reason}]
    for r in range(1, restarts + 1):
        rng = np.random.default_rng([seed, r])
        picks = sorted(int(i) for i in rng.choice(len(demand), size=k, replace=False))
        try:
            report = run(g, frame, demand, [demand[i].pos for i in picks], cfg)
        except (UnreachableDemand, OptimizerError) as e:
            logger.warning(f"Restart {r} failed: {e}")
            summary.append({"restart": r, "final_objective_m": None, "stop_reason": "Failed"})
            continue
        summary.append({"restart": r, "final_objective_m": report.final_objective_m,
                        "stop_reason": report.stop_reason})
        if report.final_objective_m < best.final_objective_m:
            best = report
    best.restarts = summary
    return best


def baseline_report(g: RoadGraph, demand: Sequence[DemandPoint],
                    existing_hub_points: Sequence[GeoPoint], cfg: OptimizerConfig) -> BaselineReport:
    """Objective of the existing hubs with nearest-hub assignment and no optimization"""
    cfg.validate()
    if not existing_hub_points:
        raise OptimizerError("at least one hub is required")
    hubs = [snap_to_node(g, p, cfg.max_snap_m) for p in existing_hub_points]
    assignment = assign_to_nearest_hub(g, demand, hubs, cfg.snap_policy)
    value = objective(assignment.clusters, assignment.distances, demand)
    logger.info(f"Baseline with {len(hubs)} hubs: {value:.1f} m per delivery")
    return BaselineReport(
        objective_m=value,
        hubs=_hub_sites(g, hubs),
        assignment=list(assignment.labels),
        dropped_demand=list(assignment.dropped),
        hub_summaries=_hub_summaries(assignment, demand),
    )


def compare_hub_sets(g: RoadGraph, from_nodes: Sequence[int], to_nodes: Sequence[int]) -> List[HubShift]:
    """Road distance from each hub of the first set to the nearest hub of the second"""
    if not from_nodes or not to_nodes:
        raise OptimizerError("both hub sets must be non-empty")
    d = od_matrix(g, from_nodes, to_nodes).d
    shifts = []
    for a, node in enumerate(from_nodes):
        b = int(np.argmin(d[a]))
        if math.isinf(d[a, b]):
            shifts.append(HubShift(a, int(node), None, None, math.inf))
        else:
            shifts.append(HubShift(a, int(node), b, int(to_nodes[b]), float(d[a, b])))
    return shifts
