#!/usr/bin/env python3
"""
Candidate Grid - hub site candidates for one cluster
Tiles the cluster's bounding box with square cells in a local planar frame
and snaps every cell centre to its nearest road node.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from road_graph import GeoPoint, RoadGraph, SnapTooFar, snap_to_node

logger = logging.getLogger(__name__)

METERS_PER_DEGREE = 111_320.0

GRID_CELL = "GridCell"
INCUMBENT_CENTROID = "IncumbentCentroid"


@dataclass(frozen=True)
class PlanarFrame:
    """Local equirectangular projection anchored at `origin`"""
    origin: GeoPoint
    kx: float  # meters per degree of longitude at the origin
    ky: float  # meters per degree of latitude

    def __post_init__(self):
        if not (self.kx > 0 and self.ky > 0):
            raise ValueError(f"planar frame factors must be positive (kx={self.kx}, ky={self.ky})")

    @classmethod
    def at(cls, origin: GeoPoint) -> "PlanarFrame":
        return cls(origin=origin,
                   kx=math.cos(math.radians(origin.lat)) * METERS_PER_DEGREE,
                   ky=METERS_PER_DEGREE)


@dataclass(frozen=True)
class CandidateSite:
    node: int
    cell_center: GeoPoint
    origin: str  # GRID_CELL or INCUMBENT_CENTROID


def frame_for_graph(g: RoadGraph) -> PlanarFrame:
    """Frame centred on the mean position of the graph's nodes"""
    if g.num_nodes == 0:
        raise ValueError("cannot build a planar frame for an empty road graph")
    lon = sum(node.pos.lon for node in g.nodes) / g.num_nodes
    lat = sum(node.pos.lat for node in g.nodes) / g.num_nodes
    return PlanarFrame.at(GeoPoint(lon, lat))


def project(frame: PlanarFrame, p: GeoPoint) -> Tuple[float, float]:
    return ((p.lon - frame.origin.lon) * frame.kx, (p.lat - frame.origin.lat) * frame.ky)


def unproject(frame: PlanarFrame, x: float, y: float) -> GeoPoint:
    return GeoPoint(frame.origin.lon + x / frame.kx, frame.origin.lat + y / frame.ky)


def grid_cells(frame: PlanarFrame, points: Sequence[GeoPoint], res_m: float) -> List[GeoPoint]:
    """
    Cell centres tiling the points' bounding box

    The grid is anchored at the box's min corner with ceil(w/res) x ceil(h/res)
    cells (at least one per axis); centres are listed row by row from the
    bottom row, west to east.
    """
    if not points:
        raise ValueError("cannot grid an empty cluster")
    if not res_m > 0:
        raise ValueError(f"grid resolution must be positive, got {res_m}")

    xy = [project(frame, p) for p in points]
    min_x = min(x for x, _ in xy)
    min_y = min(y for _, y in xy)
    width = max(x for x, _ in xy) - min_x
    height = max(y for _, y in xy) - min_y
    nx = max(1, math.ceil(width / res_m))
    ny = max(1, math.ceil(height / res_m))

    centres = []
    for iy in range(ny):
        for ix in range(nx):
            centres.append(unproject(frame, min_x + (ix + 0.5) * res_m, min_y + (iy + 0.5) * res_m))
    return centres


def generate_candidates(g: RoadGraph, frame: PlanarFrame, cluster_points: Sequence,
                        res_m: float, incumbent: Optional[int], max_snap_m: float) -> List[CandidateSite]:
    """
    Candidate hub sites for a cluster

    Args:
        cluster_points: Demand points of the cluster (anything with `.pos`)
        res_m: Grid resolution in meters
        incumbent: Current centroid node, always part of the result (None for a plain grid)
        max_snap_m: Cell centres farther than this from any node are skipped

    Returns:
        Candidates with distinct nodes; first cell wins, incumbent last
    """
    if not cluster_points:
        raise ValueError("cannot generate candidates for an empty cluster")
    if incumbent is not None:
        g.check_node(incumbent)

    sites: List[CandidateSite] = []
    seen = set()
    skipped = 0
    for centre in grid_cells(frame, [p.pos for p in cluster_points], res_m):
        try:
            node = snap_to_node(g, centre, max_snap_m)
        except SnapTooFar:
            skipped += 1
            continue
        if node in seen:
            continue
        seen.add(node)
        sites.append(CandidateSite(node=node, cell_center=centre, origin=GRID_CELL))

    if incumbent is not None and incumbent not in seen:
        sites.append(CandidateSite(node=incumbent, cell_center=g.nodes[incumbent].pos,
                                   origin=INCUMBENT_CENTROID))
    if skipped:
        logger.debug(f"{skipped} grid cell(s) had no road node within {max_snap_m:.0f} m")
    return sites
