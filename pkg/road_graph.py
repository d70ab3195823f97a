#!/usr/bin/env python3
"""
Road Graph - directed road network loading and shortest-path queries
Builds a one-way aware graph from edge records and answers single-source and
origin-destination distance queries with scipy's csgraph Dijkstra.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0

ROAD_CLASSES = ("primary", "secondary", "local", "motorway", "metro", "highway")
DIRECTION_TAGS = ("NB", "SB", "EB", "WB")
ONE_WAY = "OneWayForward"
TWO_WAY = "TwoWay"


class RoadDataError(ValueError):
    """Invalid road network input; `row` is the 1-based CSV line when known"""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class SnapTooFar(ValueError):
    """Nearest road node is farther than the snapping limit"""

    def __init__(self, point: "GeoPoint", distance_m: float, limit_m: float):
        self.point = point
        self.distance_m = distance_m
        self.limit_m = limit_m
        super().__init__(
            f"point ({point.lon}, {point.lat}) is {distance_m:.1f} m from the nearest "
            f"road node (limit {limit_m:.1f} m)"
        )


@dataclass(frozen=True)
class GeoPoint:
    lon: float
    lat: float

    def __post_init__(self):
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise ValueError(f"non-finite coordinate ({self.lon}, {self.lat})")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")


@dataclass(frozen=True)
class RoadNode:
    id: int
    pos: GeoPoint


@dataclass(frozen=True)
class EdgeRecord:
    """One raw row of the edge CSV, before validation"""
    edge_id: str
    from_id: str
    to_id: str
    from_pos: GeoPoint
    to_pos: GeoPoint
    length_m: Optional[float]
    direction: str
    road_class: str
    row: Optional[int] = None


@dataclass(frozen=True)
class RoadEdge:
    id: str
    from_node: int
    to_node: int
    length_m: float
    directionality: str
    road_class: str
    direction_tag: Optional[str] = None


@dataclass
class DistanceMatrix:
    origins: List[int]
    destinations: List[int]
    d: np.ndarray  # meters, shape (len(origins), len(destinations)), inf if unreachable


def great_circle_m(a: GeoPoint, b: GeoPoint) -> float:
    """Haversine distance in meters on a sphere of radius 6,371,000 m"""
    lng1, lat1, lng2, lat2 = map(math.radians, [a.lon, a.lat, b.lon, b.lat])
    dlng = lng2 - lng1
    dlat = lat2 - lat1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlng / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def _unit_vector(p: GeoPoint) -> np.ndarray:
    # chord length on the unit sphere orders points exactly like great-circle distance
    lon, lat = math.radians(p.lon), math.radians(p.lat)
    return np.array([math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)])


class RoadGraph:
    """Immutable directed road graph; safe for concurrent reads"""

    def __init__(self, nodes: Sequence[RoadNode], edges: Sequence[RoadEdge],
                 source_ids: Sequence[str]):
        self.nodes = tuple(nodes)
        self.edges = tuple(edges)
        self.source_ids = tuple(source_ids)

        arcs: Dict[Tuple[int, int], float] = {}
        for edge in edges:
            pairs = [(edge.from_node, edge.to_node)]
            if edge.directionality == TWO_WAY:
                pairs.append((edge.to_node, edge.from_node))
            for u, v in pairs:
                if u == v:
                    continue
                if (u, v) not in arcs or edge.length_m < arcs[(u, v)]:
                    arcs[(u, v)] = edge.length_m

        n = len(self.nodes)
        self.adjacency: List[List[Tuple[int, float]]] = [[] for _ in range(n)]
        for (u, v), length in sorted(arcs.items()):
            self.adjacency[u].append((v, length))

        if arcs:
            keys = sorted(arcs)
            rows = np.array([u for u, _ in keys], dtype=np.int64)
            cols = np.array([v for _, v in keys], dtype=np.int64)
            data = np.array([arcs[k] for k in keys], dtype=float)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            data = np.zeros(0, dtype=float)
        self._csr = csr_matrix((data, (rows, cols)), shape=(n, n))
        self.num_arcs = len(arcs)

        self._tree = None
        if n:
            self._tree = cKDTree(np.vstack([_unit_vector(node.pos) for node in self.nodes]))

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def node_pos(self, node: int) -> GeoPoint:
        self.check_node(node)
        return self.nodes[node].pos

    def check_node(self, node: int):
        if isinstance(node, bool) or not isinstance(node, (int, np.integer)) \
                or not 0 <= node < len(self.nodes):
            raise ValueError(f"invalid node id {node!r} (graph has {len(self.nodes)} nodes)")

    def arcs(self) -> List[Tuple[int, int, float]]:
        return [(u, v, length) for u, out in enumerate(self.adjacency) for v, length in out]

    def csgraph(self) -> csr_matrix:
        return self._csr


def _parse_direction(token: str, row: Optional[int]) -> Tuple[str, Optional[str]]:
    cleaned = (token or "").strip()
    if cleaned.upper() in DIRECTION_TAGS:
        return ONE_WAY, cleaned.upper()
    if cleaned.lower() == "none":
        return TWO_WAY, None
    raise RoadDataError(f"unknown direction token {token!r} (expected NB, SB, EB, WB or None)", row)


def load_road_graph(edges: Iterable[EdgeRecord],
                    excluded_classes: Optional[Set[str]] = None) -> RoadGraph:
    """
    Validate edge records and build the directed road graph

    Args:
        edges: Raw edge records (one per CSV row)
        excluded_classes: Road classes that contribute no arcs

    Returns:
        RoadGraph with dense node ids in order of first appearance
    """
    excluded = {c.strip().lower() for c in (excluded_classes or set())}
    for road_class in excluded:
        if road_class not in ROAD_CLASSES:
            raise RoadDataError(f"unknown excluded road class {road_class!r}")

    seen_edge_ids: Set[str] = set()
    source_pos: Dict[str, GeoPoint] = {}
    node_index: Dict[str, int] = {}
    nodes: List[RoadNode] = []
    source_ids: List[str] = []
    road_edges: List[RoadEdge] = []
    excluded_count = 0

    for record in edges:
        row = record.row
        if record.edge_id in seen_edge_ids:
            raise RoadDataError(f"duplicate edge id {record.edge_id!r}", row)
        seen_edge_ids.add(record.edge_id)

        directionality, tag = _parse_direction(record.direction, row)
        road_class = (record.road_class or "").strip().lower()
        if road_class not in ROAD_CLASSES:
            raise RoadDataError(f"unknown road class {record.road_class!r}", row)

        for source_id, pos in ((record.from_id, record.from_pos), (record.to_id, record.to_pos)):
            known = source_pos.get(source_id)
            if known is None:
                source_pos[source_id] = pos
            elif known != pos:
                raise RoadDataError(
                    f"node {source_id!r} has inconsistent coordinates "
                    f"({known.lon}, {known.lat}) vs ({pos.lon}, {pos.lat})", row)

        length = record.length_m
        if length is None or (isinstance(length, float) and math.isnan(length)):
            length = great_circle_m(record.from_pos, record.to_pos)
        if not math.isfinite(length) or length <= 0:
            raise RoadDataError(f"edge {record.edge_id!r} has non-positive length {length}", row)

        if road_class in excluded:
            excluded_count += 1
            continue

        ends = []
        for source_id, pos in ((record.from_id, record.from_pos), (record.to_id, record.to_pos)):
            if source_id not in node_index:
                node_index[source_id] = len(nodes)
                nodes.append(RoadNode(id=len(nodes), pos=pos))
                source_ids.append(source_id)
            ends.append(node_index[source_id])

        road_edges.append(RoadEdge(
            id=record.edge_id,
            from_node=ends[0],
            to_node=ends[1],
            length_m=float(length),
            directionality=directionality,
            road_class=road_class,
            direction_tag=tag,
        ))

    graph = RoadGraph(nodes, road_edges, source_ids)
    logger.info(f"Road graph loaded: {graph.num_nodes} nodes, {graph.num_arcs} arcs "
                f"({excluded_count} edges excluded)")
    return graph


def snap_to_node(g: RoadGraph, p: GeoPoint, max_snap_m: float) -> int:
    """Nearest node by great-circle distance; ties go to the smallest node id"""
    if g.num_nodes == 0:
        raise ValueError("cannot snap to an empty road graph")
    xyz = _unit_vector(p)
    chord, _ = g._tree.query(xyz)
    near = g._tree.query_ball_point(xyz, chord * (1 + 1e-9) + 1e-12)
    best = min(near, key=lambda i: (great_circle_m(p, g.nodes[i].pos), i))
    distance = great_circle_m(p, g.nodes[best].pos)
    if distance > max_snap_m:
        raise SnapTooFar(p, distance, max_snap_m)
    return int(best)


def sssp(g: RoadGraph, source: int) -> np.ndarray:
    """Single-source shortest path distances in meters (inf when unreachable)"""
    g.check_node(source)
    return dijkstra(g.csgraph(), directed=True, indices=int(source))


def od_matrix(g: RoadGraph, origins: Sequence[int], destinations: Sequence[int]) -> DistanceMatrix:
    """
    Origin-destination matrix of shortest road distances

    One Dijkstra per distinct origin; rows are independent of computation order.
    """
    origins = [int(o) for o in origins]
    destinations = [int(t) for t in destinations]
    for node in origins + destinations:
        g.check_node(node)

    if not origins or not destinations:
        return DistanceMatrix(origins, destinations, np.zeros((len(origins), len(destinations))))

    unique = sorted(set(origins))
    rows = dijkstra(g.csgraph(), directed=True, indices=unique)
    rows = np.atleast_2d(rows)
    row_of = {node: i for i, node in enumerate(unique)}
    d = rows[[row_of[o] for o in origins]][:, destinations]
    return DistanceMatrix(origins, destinations, np.ascontiguousarray(d))
