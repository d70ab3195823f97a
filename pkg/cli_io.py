#!/usr/bin/env python3
"""
CLI I/O - file ingestion and artifact emission for hub placement runs
Reads the edge / delivery / population / hub CSVs, writes report.json,
CSV tables and GeoJSON layers, and computes the per-cluster convex hulls.
"""

import hashlib
import json
import logging
import math
import os
import shutil
import tempfile
from contextlib import contextmanager
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import pandas as pd

from candidate_grid import PlanarFrame, project, unproject
from config import TOOL_VERSION
from demand import DeliveryRecord, DemandDataError, DemandPoint, PopulationCell
from hub_optimizer import (BaselineReport, HubSite, HubSummary, IterationStats,
                           OptimizationReport)
from road_graph import DistanceMatrix, EdgeRecord, GeoPoint, RoadDataError

logger = logging.getLogger(__name__)

EDGE_COLUMNS = ("edge_id", "from_id", "to_id", "from_lon", "from_lat",
                "to_lon", "to_lat", "length_m", "direction", "road_class")


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def _read_table(path: str, required: Sequence[str], error_cls) -> pd.DataFrame:
    """Read a CSV as strings; "None" and empty cells stay literal"""
    df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    df.columns = [c.strip() for c in df.columns]
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise error_cls(f"{path}: missing column(s) {', '.join(missing)}")
    return df


def _number(value: str, column: str, row: int, error_cls) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise error_cls(f"column {column!r} is not a number: {value!r}", row) from None


def _point(lon: str, lat: str, row: int, error_cls) -> GeoPoint:
    lon_v = _number(lon, "lon", row, error_cls)
    lat_v = _number(lat, "lat", row, error_cls)
    try:
        return GeoPoint(lon_v, lat_v)
    except ValueError as e:
        raise error_cls(str(e), row) from None


class PointDataError(DemandDataError):
    """Invalid row in a point CSV; `row` is the 1-based CSV line"""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


def read_edges_csv(path: str) -> List[EdgeRecord]:
    """
    Read the road edge CSV

    Columns: edge_id,from_id,to_id,from_lon,from_lat,to_lon,to_lat,length_m,direction,road_class
    An empty length_m is computed later from the end coordinates.
    """
    df = _read_table(path, EDGE_COLUMNS, RoadDataError)
    records = []
    for index, r in enumerate(df.itertuples(index=False)):
        row = index + 2
        length = r.length_m.strip()
        records.append(EdgeRecord(
            edge_id=r.edge_id.strip(),
            from_id=r.from_id.strip(),
            to_id=r.to_id.strip(),
            from_pos=_point(r.from_lon, r.from_lat, row, RoadDataError),
            to_pos=_point(r.to_lon, r.to_lat, row, RoadDataError),
            length_m=_number(length, "length_m", row, RoadDataError) if length else None,
            direction=r.direction,
            road_class=r.road_class,
            row=row,
        ))
    logger.info(f"Read {len(records)} edges from {path}")
    return records


def read_deliveries_csv(path: str) -> List[DeliveryRecord]:
    """One delivery per row: lon,lat[,timestamp]"""
    df = _read_table(path, ("lon", "lat"), PointDataError)
    has_ts = "timestamp" in df.columns
    records = []
    for index, r in enumerate(df.itertuples(index=False)):
        timestamp = (r.timestamp.strip() or None) if has_ts else None
        records.append(DeliveryRecord(pos=_point(r.lon, r.lat, index + 2, PointDataError),
                                      timestamp=timestamp))
    logger.info(f"Read {len(records)} deliveries from {path}")
    return records


def read_population_csv(path: str) -> List[PopulationCell]:
    """Population cell centres: lon,lat,ppp"""
    df = _read_table(path, ("lon", "lat", "ppp"), PointDataError)
    cells = []
    for index, r in enumerate(df.itertuples(index=False)):
        row = index + 2
        center = _point(r.lon, r.lat, row, PointDataError)
        ppp = _number(r.ppp, "ppp", row, PointDataError)
        try:
            cells.append(PopulationCell(center=center, ppp=ppp))
        except DemandDataError as e:
            raise PointDataError(str(e), row) from None
    logger.info(f"Read {len(cells)} population cells from {path}")
    return cells


def read_points_csv(path: str) -> Tuple[List[GeoPoint], List[str]]:
    """Points with an optional label: lon,lat[,name]; unnamed rows get their index"""
    df = _read_table(path, ("lon", "lat"), PointDataError)
    has_name = "name" in df.columns
    points, names = [], []
    for index, r in enumerate(df.itertuples(index=False)):
        points.append(_point(r.lon, r.lat, index + 2, PointDataError))
        name = r.name.strip() if has_name else ""
        names.append(name or str(index))
    return points, names


def read_hubs_csv(path: str) -> Tuple[List[GeoPoint], List[str]]:
    points, names = read_points_csv(path)
    if not points:
        raise PointDataError(f"{path}: no hubs listed")
    logger.info(f"Read {len(points)} hubs from {path}")
    return points, names


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def file_digest(path: str) -> str:
    """sha256 of the file's bytes"""
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(inputs: Dict[str, Optional[str]], config: Dict) -> Dict:
    """
    Reproducibility envelope embedded in every report

    Args:
        inputs: Input role -> path (None entries are omitted)
        config: Echo of every parameter that shaped the run
    """
    return {
        "tool_version": TOOL_VERSION,
        "inputs": {name: {"path": path, "sha256": file_digest(path)}
                   for name, path in sorted(inputs.items()) if path},
        "config": config,
    }


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def _encode(value: Optional[float]):
    if value is None:
        return None
    return "inf" if math.isinf(value) else float(value)


def _decode(value) -> Optional[float]:
    if value is None:
        return None
    return math.inf if value == "inf" else float(value)


def _hub_to_dict(hub: HubSite) -> Dict:
    return {"cluster": hub.cluster, "node": hub.node, "lon": hub.pos.lon, "lat": hub.pos.lat}


def _hub_from_dict(data: Dict) -> HubSite:
    return HubSite(cluster=int(data["cluster"]), node=int(data["node"]),
                   pos=GeoPoint(float(data["lon"]), float(data["lat"])))


def _summary_to_dict(s: HubSummary) -> Dict:
    return {"cluster": s.cluster, "node": s.node, "members": s.members, "deliveries": s.deliveries,
            "weight": s.weight, "mean_distance_m": _encode(s.mean_distance_m)}


def _summary_from_dict(data: Dict) -> HubSummary:
    return HubSummary(cluster=int(data["cluster"]), node=int(data["node"]),
                      members=int(data["members"]), deliveries=int(data["deliveries"]),
                      weight=float(data["weight"]), mean_distance_m=_decode(data["mean_distance_m"]))


def report_to_dict(report: OptimizationReport, manifest: Optional[Dict] = None,
                   demand_summary: Optional[Dict] = None) -> Dict:
    """JSON-ready report; infinities become "inf" """
    return {
        "manifest": manifest or {},
        "demand": demand_summary or {},
        "baseline_objective_m": _encode(report.baseline_objective_m),
        "final_objective_m": _encode(report.final_objective_m),
        "stop_reason": report.stop_reason,
        "iterations": [{
            "iteration": s.iteration,
            "objective_m": _encode(s.objective_m),
            "centroid_moves_m": [_encode(m) for m in s.centroid_moves_m],
            "candidates_evaluated": s.candidates_evaluated,
            "hubs": list(s.hubs),
            "assignment": list(s.assignment),
        } for s in report.iterations],
        "initial_hubs": [_hub_to_dict(h) for h in report.initial_hubs],
        "final_hubs": [_hub_to_dict(h) for h in report.final_hubs],
        "final_assignment": list(report.final_assignment),
        "dropped_demand": list(report.dropped_demand),
        "hub_summaries": [_summary_to_dict(s) for s in report.hub_summaries],
        "restarts": list(report.restarts),
    }


def report_from_dict(data: Dict) -> OptimizationReport:
    return OptimizationReport(
        baseline_objective_m=_decode(data["baseline_objective_m"]),
        iterations=[IterationStats(
            iteration=int(s["iteration"]),
            objective_m=_decode(s["objective_m"]),
            centroid_moves_m=[_decode(m) for m in s["centroid_moves_m"]],
            candidates_evaluated=int(s["candidates_evaluated"]),
            hubs=[int(h) for h in s.get("hubs", [])],
            assignment=[int(a) for a in s.get("assignment", [])],
        ) for s in data["iterations"]],
        final_hubs=[_hub_from_dict(h) for h in data["final_hubs"]],
        final_assignment=[int(a) for a in data["final_assignment"]],
        stop_reason=data["stop_reason"],
        final_objective_m=_decode(data["final_objective_m"]),
        initial_hubs=[_hub_from_dict(h) for h in data.get("initial_hubs", [])],
        dropped_demand=[int(i) for i in data.get("dropped_demand", [])],
        hub_summaries=[_summary_from_dict(s) for s in data.get("hub_summaries", [])],
        restarts=list(data.get("restarts", [])),
    )


def baseline_to_dict(report: BaselineReport, manifest: Optional[Dict] = None,
                     demand_summary: Optional[Dict] = None) -> Dict:
    return {
        "manifest": manifest or {},
        "demand": demand_summary or {},
        "objective_m": _encode(report.objective_m),
        "hubs": [_hub_to_dict(h) for h in report.hubs],
        "cluster_sizes": report.cluster_sizes,
        "hub_summaries": [_summary_to_dict(s) for s in report.hub_summaries],
        "assignment": list(report.assignment),
        "dropped_demand": list(report.dropped_demand),
    }


def write_json(path: str, data: Dict):
    """Byte-stable JSON (sorted keys, no NaN/Infinity literals)"""
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")


def write_report_json(path: str, report: OptimizationReport, manifest: Optional[Dict] = None,
                      demand_summary: Optional[Dict] = None):
    write_json(path, report_to_dict(report, manifest, demand_summary))


def read_report_json(path: str) -> Tuple[OptimizationReport, Dict]:
    """Parse a report.json back into an OptimizationReport plus its manifest"""
    with open(path, 'r') as f:
        data = json.load(f)
    return report_from_dict(data), data.get("manifest", {})


def demand_summary(demand) -> Dict:
    """Counts describing a DemandSet for the report header"""
    return {
        "points": len(demand),
        "deliveries": demand.total_count,
        "dropped_points": demand.dropped_points,
        "dropped_records": demand.dropped_records,
        "unbinned_records": demand.unbinned_records,
        "total_weight": math.fsum(p.weight for p in demand),
    }


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------

def write_objective_csv(path: str, iterations: Sequence[IterationStats]):
    pd.DataFrame({
        "iteration": [s.iteration for s in iterations],
        "objective_m": [s.objective_m for s in iterations],
    }).to_csv(path, index=False)


def write_assignment_csv(path: str, demand: Sequence[DemandPoint], labels: Sequence[int]):
    """One row per demand point; cluster -1 marks dropped demand"""
    pd.DataFrame({
        "demand_id": [p.id for p in demand],
        "lon": [p.pos.lon for p in demand],
        "lat": [p.pos.lat for p in demand],
        "node": [p.node for p in demand],
        "count": [p.count for p in demand],
        "weight": [p.weight for p in demand],
        "cluster": list(labels),
    }).to_csv(path, index=False)


def write_od_csv(path: str, matrix: DistanceMatrix, origin_names: Optional[Sequence[str]] = None,
                 destination_names: Optional[Sequence[str]] = None):
    """Dense origin x destination table in meters; unreachable pairs are written as inf"""
    origin_names = list(origin_names or [str(i) for i in range(len(matrix.origins))])
    destination_names = list(destination_names or [str(i) for i in range(len(matrix.destinations))])
    df = pd.DataFrame(matrix.d, index=pd.Index(origin_names, name="origin"),
                      columns=destination_names)
    df.to_csv(path)


# ---------------------------------------------------------------------------
# Geometry and GeoJSON
# ---------------------------------------------------------------------------

def _cross(o: Tuple[float, float], a: Tuple[float, float], b: Tuple[float, float]) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """
    Monotone-chain convex hull, counter-clockwise from the lexicographically
    smallest vertex

    Collinear boundary points are dropped; a single distinct point comes back
    alone and collinear input comes back as its two end points.
    """
    if not points:
        raise ValueError("convex hull of an empty point set")
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) <= 2:
        return pts

    lower: List[Tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: List[Tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _hull_geometry(frame: PlanarFrame, positions: Sequence[GeoPoint]) -> Dict:
    hull = convex_hull([project(frame, p) for p in positions])
    coords = [[q.lon, q.lat] for q in (unproject(frame, x, y) for x, y in hull)]
    if len(coords) == 1:
        return {"type": "Point", "coordinates": coords[0]}
    if len(coords) == 2:
        return {"type": "LineString", "coordinates": coords}
    return {"type": "Polygon", "coordinates": [coords + [coords[0]]]}


def _feature(geometry: Dict, properties: Dict) -> Dict:
    return {"type": "Feature", "geometry": geometry, "properties": properties}


def _collection(features: List[Dict]) -> Dict:
    return {"type": "FeatureCollection", "features": features}


def hubs_geojson(hubs: Sequence[HubSite], summaries: Sequence[HubSummary] = ()) -> Dict:
    """Point per hub, with its cluster summary when available"""
    by_cluster = {s.cluster: s for s in summaries}
    features = []
    for hub in hubs:
        properties = {"cluster": hub.cluster, "node": hub.node}
        summary = by_cluster.get(hub.cluster)
        if summary is not None:
            properties.update(members=summary.members, deliveries=summary.deliveries,
                              weight=summary.weight,
                              mean_distance_m=_encode(summary.mean_distance_m))
        features.append(_feature({"type": "Point", "coordinates": [hub.pos.lon, hub.pos.lat]},
                                 properties))
    return _collection(features)


def _cluster_features(frame: PlanarFrame, demand: Sequence[DemandPoint], labels: Sequence[int],
                      hubs: Sequence[int], extra: Optional[Dict] = None) -> List[Dict]:
    members: Dict[int, List[GeoPoint]] = {}
    for point, label in zip(demand, labels):
        if label >= 0:
            members.setdefault(label, []).append(point.pos)
    features = []
    for cluster in sorted(members):
        properties = {"cluster": cluster, "hub_node": int(hubs[cluster]),
                      "members": len(members[cluster])}
        properties.update(extra or {})
        features.append(_feature(_hull_geometry(frame, members[cluster]), properties))
    return features


def clusters_geojson(frame: PlanarFrame, demand: Sequence[DemandPoint], labels: Sequence[int],
                     hubs: Sequence[int]) -> Dict:
    """Convex hull of every non-empty cluster"""
    return _collection(_cluster_features(frame, demand, labels, hubs))


def cluster_history_geojson(frame: PlanarFrame, demand: Sequence[DemandPoint],
                            iterations: Sequence[IterationStats]) -> Dict:
    """Cluster hulls for every iteration, tagged with an `iteration` property"""
    features = []
    for stats in iterations:
        features.extend(_cluster_features(frame, demand, stats.assignment, stats.hubs,
                                          {"iteration": stats.iteration}))
    return _collection(features)


def write_geojson(path: str, collection: Dict):
    write_json(path, collection)


# ---------------------------------------------------------------------------
# Output directory
# ---------------------------------------------------------------------------

@contextmanager
def atomic_output_dir(out_dir: str) -> Iterator[str]:
    """
    Yield a scratch directory that replaces `out_dir` only if the block succeeds

    The scratch directory lives next to `out_dir` so the final move stays on
    one filesystem; on failure it is removed and `out_dir` is left untouched.
    """
    target = os.path.abspath(out_dir)
    parent = os.path.dirname(target)
    os.makedirs(parent, exist_ok=True)
    scratch = tempfile.mkdtemp(prefix=f".{os.path.basename(target)}.tmp_", dir=parent)
    os.chmod(scratch, 0o755)
    try:
        yield scratch
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    if os.path.isdir(target):
        shutil.rmtree(target)
    os.replace(scratch, target)
    logger.info(f"Artifacts written to {out_dir}")
