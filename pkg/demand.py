#!/usr/bin/env python3
"""
Demand - weighted demand points from deliveries and population cells
Aggregates delivery pins, snaps them to the road graph, and blends normalized
delivery counts with normalized population per pixel into one weight.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from candidate_grid import PlanarFrame, project
from config import DEFAULT_CELL_SIZE_M, NORM_SCHEMES
from road_graph import GeoPoint, RoadGraph, SnapTooFar, snap_to_node

logger = logging.getLogger(__name__)


class DemandDataError(ValueError):
    """Invalid delivery/population input or weight arguments"""


@dataclass(frozen=True)
class DeliveryRecord:
    pos: GeoPoint
    timestamp: Optional[str] = None


@dataclass
class DemandPoint:
    id: int
    pos: GeoPoint
    node: int
    count: int
    weight: float


@dataclass(frozen=True)
class PopulationCell:
    center: GeoPoint
    ppp: float

    def __post_init__(self):
        if not math.isfinite(self.ppp) or self.ppp < 0:
            raise DemandDataError(f"population per pixel must be finite and >= 0, got {self.ppp}")


@dataclass(frozen=True)
class WeightBlend:
    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and 0.0 <= self.alpha <= 1.0):
            raise DemandDataError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass
class DemandSet:
    """Demand points plus what was lost on the way in"""
    points: List[DemandPoint] = field(default_factory=list)
    dropped_records: int = 0   # deliveries lost to lenient snapping
    dropped_points: int = 0    # pins or cells lost to lenient snapping
    unbinned_records: int = 0  # phase 2: deliveries outside every cell

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[DemandPoint]:
        return iter(self.points)

    def __getitem__(self, index):
        return self.points[index]

    @property
    def total_count(self) -> int:
        return sum(p.count for p in self.points)


def aggregate_deliveries(records: Sequence[DeliveryRecord]) -> List[Tuple[GeoPoint, int]]:
    """One entry per distinct coordinate pair, ordered by (lat, lon)"""
    counts = Counter(record.pos for record in records)
    return sorted(counts.items(), key=lambda item: (item[0].lat, item[0].lon))


def _check_values(values: Sequence[float]) -> List[float]:
    values = [float(v) for v in values]
    for v in values:
        if not math.isfinite(v) or v < 0:
            raise DemandDataError(f"normalization needs finite non-negative values, got {v}")
    return values


def normalize_max(values: Sequence[float]) -> List[float]:
    values = _check_values(values)
    peak = max(values, default=0.0)
    if peak == 0:
        return [0.0] * len(values)
    return [v / peak for v in values]


def normalize_sum(values: Sequence[float]) -> List[float]:
    values = _check_values(values)
    total = math.fsum(values)
    if total == 0:
        return [0.0] * len(values)
    return [v / total for v in values]


def normalize(values: Sequence[float], scheme: str = "max") -> List[float]:
    if scheme == "max":
        return normalize_max(values)
    if scheme == "sum":
        return normalize_sum(values)
    raise DemandDataError(f"unknown normalization scheme {scheme!r} (expected one of {NORM_SCHEMES})")


def blend_weight(x: float, y: float, b: WeightBlend) -> float:
    """h = alpha * x + (1 - alpha) * y for normalized deliveries x and population y"""
    for name, value in (("x", x), ("y", y)):
        if not (math.isfinite(value) and 0.0 <= value <= 1.0):
            raise DemandDataError(f"{name} must lie in [0, 1], got {value}")
    return min(1.0, b.alpha * x + (1.0 - b.alpha) * y)


def _snap_and_merge(g: RoadGraph, entries: Sequence[Tuple[GeoPoint, int, float]],
                    max_snap_m: float, snap_policy: str) -> DemandSet:
    """Snap entries in order; entries landing on the same node merge into the first"""
    if snap_policy not in ("strict", "lenient"):
        raise DemandDataError(f"unknown snap policy {snap_policy!r}")

    demand = DemandSet()
    by_node = {}
    for pos, count, weight in entries:
        try:
            node = snap_to_node(g, pos, max_snap_m)
        except SnapTooFar:
            if snap_policy == "strict":
                raise
            demand.dropped_records += count
            demand.dropped_points += 1
            continue
        if node in by_node:
            merged = demand.points[by_node[node]]
            merged.count += count
            merged.weight += weight
            continue
        by_node[node] = len(demand.points)
        demand.points.append(DemandPoint(id=len(demand.points), pos=pos, node=node,
                                         count=count, weight=weight))

    if demand.dropped_points:
        logger.warning(f"Dropped {demand.dropped_points} demand location(s) "
                       f"({demand.dropped_records} deliveries) farther than {max_snap_m:.0f} m "
                       f"from the road network")
    return demand


def build_phase1_demand(g: RoadGraph, records: Sequence[DeliveryRecord], max_snap_m: float,
                        snap_policy: str = "strict") -> DemandSet:
    """Unique delivery pins snapped to the graph, weighted by their delivery count"""
    entries = [(pos, count, float(count)) for pos, count in aggregate_deliveries(records)]
    demand = _snap_and_merge(g, entries, max_snap_m, snap_policy)
    logger.info(f"Phase 1 demand: {len(records)} deliveries -> {len(demand)} demand points")
    return demand


def bin_deliveries(frame: PlanarFrame, records: Sequence[DeliveryRecord],
                   cells: Sequence[PopulationCell],
                   cell_size_m: float = DEFAULT_CELL_SIZE_M) -> Tuple[List[int], int]:
    """
    Count deliveries per population cell

    A delivery belongs to the lowest-index cell whose square (centre +/- half
    the cell size, boundary included) contains it.

    Returns:
        (counts per cell, number of deliveries outside every cell)
    """
    counts = [0] * len(cells)
    if not records:
        return counts, 0
    if not cells:
        return counts, len(records)

    tree = cKDTree(np.array([project(frame, cell.center) for cell in cells]))
    unbinned = 0
    half = cell_size_m / 2.0
    for record in records:
        hits = tree.query_ball_point(project(frame, record.pos), half, p=np.inf)
        if not hits:
            unbinned += 1
            continue
        counts[min(hits)] += 1
    return counts, unbinned


def build_phase2_demand(g: RoadGraph, frame: PlanarFrame, records: Sequence[DeliveryRecord],
                        cells: Sequence[PopulationCell], b: WeightBlend, max_snap_m: float,
                        snap_policy: str = "strict", norm: str = "max",
                        cell_size_m: float = DEFAULT_CELL_SIZE_M) -> DemandSet:
    """
    One demand point per population cell centre, weighted by the blend of
    normalized binned deliveries and normalized population

    Args:
        frame: Planar frame used for cell membership
        records: Raw delivery records (binned into cells)
        cells: Population cells (centres + ppp)
        b: Blend between deliveries (alpha) and population (1 - alpha)
        norm: "max" or "sum" normalization
    """
    if not cells:
        raise DemandDataError("phase 2 demand needs at least one population cell")

    counts, unbinned = bin_deliveries(frame, records, cells, cell_size_m)
    xs = normalize(counts, norm)
    ys = normalize([cell.ppp for cell in cells], norm)
    entries = [(cell.center, count, blend_weight(x, y, b))
               for cell, count, x, y in zip(cells, counts, xs, ys)]

    demand = _snap_and_merge(g, entries, max_snap_m, snap_policy)
    demand.unbinned_records = unbinned
    if unbinned:
        logger.warning(f"{unbinned} deliveries fall outside every population cell")
    logger.info(f"Phase 2 demand: {len(cells)} cells (alpha={b.alpha}) -> {len(demand)} demand points")
    return demand
