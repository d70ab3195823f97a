#!/usr/bin/env python3
"""
Synthetic Fixtures - seeded road networks, deliveries and population cells
Stands in for proprietary city data: a lattice or random planar road
network with some one-way streets, Gaussian delivery clusters, a population
grid and a set of displaced "existing" hubs.
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay

from candidate_grid import PlanarFrame, unproject
from demand import DeliveryRecord, PopulationCell
from road_graph import EdgeRecord, GeoPoint, great_circle_m

logger = logging.getLogger(__name__)

# Lahore city centre
LAHORE = GeoPoint(74.3587, 31.5204)


@dataclass
class Fixture:
    frame: PlanarFrame
    edges: List[EdgeRecord]
    deliveries: List[DeliveryRecord]
    cells: List[PopulationCell]
    hubs: List[GeoPoint]
    centers_m: List[Tuple[float, float]]


def _direction_tag(dx: float, dy: float) -> str:
    if abs(dx) >= abs(dy):
        return "EB" if dx > 0 else "WB"
    return "NB" if dy > 0 else "SB"


def _strongly_connected(n: int, arcs: Sequence[Tuple[int, int]]) -> bool:
    rows = np.array([u for u, _ in arcs], dtype=np.int64)
    cols = np.array([v for _, v in arcs], dtype=np.int64)
    graph = csr_matrix((np.ones(len(arcs)), (rows, cols)), shape=(n, n))
    count, _ = connected_components(graph, directed=True, connection='strong')
    return count == 1


def _make_edges(frame: PlanarFrame, xy: np.ndarray, pairs: List[Tuple[int, int]],
                lengths: List[float], classes: List[str], oneway_frac: float,
                rng: np.random.Generator) -> List[EdgeRecord]:
    """
    Turn node pairs into edge records, making a seeded share of them one-way

    A candidate one-way street is kept only while the network stays strongly
    connected; its orientation is drawn at random.
    """
    n = len(xy)
    oriented = list(pairs)
    oneway = [False] * len(pairs)

    def arcs():
        out = []
        for k, (u, v) in enumerate(oriented):
            out.append((u, v))
            if not oneway[k]:
                out.append((v, u))
        return out

    target = int(round(oneway_frac * len(pairs)))
    made = 0
    for k in rng.permutation(len(pairs)):
        if made >= target:
            break
        u, v = oriented[k]
        if rng.random() < 0.5:
            oriented[k] = (v, u)
        oneway[k] = True
        if _strongly_connected(n, arcs()):
            made += 1
        else:
            oneway[k] = False
            oriented[k] = (u, v)
    if made < target:
        logger.warning(f"Only {made} of {target} one-way streets keep the network strongly connected")

    positions = [unproject(frame, float(x), float(y)) for x, y in xy]
    edges = []
    for k, (u, v) in enumerate(oriented):
        direction = "None"
        if oneway[k]:
            direction = _direction_tag(xy[v][0] - xy[u][0], xy[v][1] - xy[u][1])
        edges.append(EdgeRecord(
            edge_id=f"e{k}",
            from_id=f"n{u}",
            to_id=f"n{v}",
            from_pos=positions[u],
            to_pos=positions[v],
            length_m=lengths[k],
            direction=direction,
            road_class=classes[k],
            row=k + 2,
        ))
    return edges


def lattice_edges(rows: int, cols: int, spacing_m: float, oneway_frac: float = 0.1,
                  origin: GeoPoint = LAHORE, seed: int = 0) -> List[EdgeRecord]:
    """
    rows x cols street lattice centred on `origin`

    Every edge is `spacing_m` long; every 10th border edge is a primary road,
    the rest local streets.
    """
    if rows < 2 or cols < 2:
        raise ValueError(f"lattice needs at least 2x2 nodes, got {rows}x{cols}")
    frame = PlanarFrame.at(origin)
    rng = np.random.default_rng(seed)

    xy = np.array([((c - (cols - 1) / 2) * spacing_m, (r - (rows - 1) / 2) * spacing_m)
                   for r in range(rows) for c in range(cols)])
    pairs, border = [], []
    for r in range(rows):
        for c in range(cols - 1):
            pairs.append((r * cols + c, r * cols + c + 1))
            border.append(r in (0, rows - 1))
    for r in range(rows - 1):
        for c in range(cols):
            pairs.append((r * cols + c, (r + 1) * cols + c))
            border.append(c in (0, cols - 1))

    classes = []
    border_seen = 0
    for on_border in border:
        if on_border:
            classes.append("primary" if border_seen % 10 == 0 else "local")
            border_seen += 1
        else:
            classes.append("local")

    edges = _make_edges(frame, xy, pairs, [float(spacing_m)] * len(pairs), classes, oneway_frac, rng)
    logger.info(f"Lattice {rows}x{cols}: {len(edges)} edges, spacing {spacing_m} m")
    return edges


def planar_edges(n_nodes: int, extent_m: float, oneway_frac: float = 0.1,
                 origin: GeoPoint = LAHORE, seed: int = 0) -> List[EdgeRecord]:
    """Delaunay triangulation of random points; lengths are whole meters (ceil of great-circle)"""
    if n_nodes < 3:
        raise ValueError(f"planar network needs at least 3 nodes, got {n_nodes}")
    frame = PlanarFrame.at(origin)
    rng = np.random.default_rng(seed)
    xy = rng.uniform(-extent_m / 2, extent_m / 2, size=(n_nodes, 2))

    pairs = set()
    for simplex in Delaunay(xy).simplices:
        for a, b in ((0, 1), (1, 2), (0, 2)):
            u, v = sorted((int(simplex[a]), int(simplex[b])))
            pairs.add((u, v))
    pairs = sorted(pairs)

    positions = [unproject(frame, float(x), float(y)) for x, y in xy]
    lengths = [float(max(1, math.ceil(great_circle_m(positions[u], positions[v])))) for u, v in pairs]
    classes = ["secondary" if k % 7 == 0 else "local" for k in range(len(pairs))]
    return _make_edges(frame, xy, pairs, lengths, classes, oneway_frac, rng)


def random_edges(n_nodes: int, n_edges: int, oneway_frac: float = 0.5, max_length_m: int = 100,
                 extent_m: float = 5000.0, origin: GeoPoint = LAHORE,
                 seed: int = 0) -> List[EdgeRecord]:
    """
    Random directed road network with whole-meter lengths

    Lengths are drawn independently of geometry, parallel edges and nodes
    without edges can occur, and nothing guarantees connectivity.
    """
    if n_nodes < 2:
        raise ValueError(f"random network needs at least 2 nodes, got {n_nodes}")
    frame = PlanarFrame.at(origin)
    rng = np.random.default_rng(seed)
    xy = rng.uniform(-extent_m / 2, extent_m / 2, size=(n_nodes, 2))
    positions = [unproject(frame, float(x), float(y)) for x, y in xy]

    edges = []
    for k in range(n_edges):
        u, v = (int(i) for i in rng.choice(n_nodes, size=2, replace=False))
        direction = "None"
        if rng.random() < oneway_frac:
            direction = _direction_tag(xy[v][0] - xy[u][0], xy[v][1] - xy[u][1])
        edges.append(EdgeRecord(
            edge_id=f"e{k}",
            from_id=f"n{u}",
            to_id=f"n{v}",
            from_pos=positions[u],
            to_pos=positions[v],
            length_m=float(rng.integers(1, max_length_m + 1)),
            direction=direction,
            road_class="local",
            row=k + 2,
        ))
    return edges


def clustered_deliveries(frame: PlanarFrame, centers_m: Sequence[Tuple[float, float]],
                         sigma_m: float, counts: Sequence[int], seed: int = 0,
                         pin_decimals: int = 3,
                         bounds_m: Optional[float] = None) -> List[DeliveryRecord]:
    """
    Gaussian delivery scatter around each centre

    Coordinates are rounded to `pin_decimals` so nearby parcels share a pin.
    With `bounds_m` set, offsets are clipped to the square +/- bounds_m.
    """
    if len(centers_m) != len(counts):
        raise ValueError("one delivery count per centre is required")
    rng = np.random.default_rng(seed)
    records = []
    for (cx, cy), count in zip(centers_m, counts):
        xy = rng.normal(loc=(cx, cy), scale=sigma_m, size=(int(count), 2))
        if bounds_m is not None:
            xy = np.clip(xy, -bounds_m, bounds_m)
        for x, y in xy:
            p = unproject(frame, float(x), float(y))
            records.append(DeliveryRecord(pos=GeoPoint(round(p.lon, pin_decimals),
                                                       round(p.lat, pin_decimals))))
    return records


def population_cells(frame: PlanarFrame, extent_m: float, cell_size_m: float,
                     centers_m: Sequence[Tuple[float, float]], sigma_m: float,
                     peak_ppp: float, seed: int = 0) -> List[PopulationCell]:
    """Square grid of cells over +/- extent_m/2 with Gaussian bumps plus noise"""
    rng = np.random.default_rng(seed)
    n = max(1, math.ceil(extent_m / cell_size_m))
    start = -n * cell_size_m / 2 + cell_size_m / 2
    cells = []
    for iy in range(n):
        for ix in range(n):
            x = start + ix * cell_size_m
            y = start + iy * cell_size_m
            ppp = sum(peak_ppp * math.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * sigma_m ** 2))
                      for cx, cy in centers_m)
            ppp = max(0.0, ppp + rng.normal(0.0, 0.05 * peak_ppp))
            cells.append(PopulationCell(center=unproject(frame, x, y), ppp=round(ppp, 2)))
    return cells


def displaced_hubs(frame: PlanarFrame, centers_m: Sequence[Tuple[float, float]],
                   offset_m: float, seed: int = 0) -> List[GeoPoint]:
    """One hub per centre, pushed `offset_m` away in a random direction"""
    rng = np.random.default_rng(seed)
    hubs = []
    for cx, cy in centers_m:
        angle = rng.uniform(0, 2 * math.pi)
        hubs.append(unproject(frame, cx + offset_m * math.cos(angle), cy + offset_m * math.sin(angle)))
    return hubs


def lahore_analogue(seed: int = 0, rows: int = 20, cols: int = 20, spacing_m: float = 500.0,
                    oneway_frac: float = 0.1, deliveries: int = 2000) -> Fixture:
    """
    City-scale test instance

    A rows x cols lattice with three Gaussian delivery clusters, a 1 km
    population grid and hubs displaced about 1.5 km from the cluster centres.
    """
    frame = PlanarFrame.at(LAHORE)
    half_w = (cols - 1) * spacing_m / 2
    half_h = (rows - 1) * spacing_m / 2
    half = min(half_w, half_h)

    centers_m = [(-0.5 * half_w, -0.4 * half_h), (0.5 * half_w, -0.3 * half_h), (0.0, 0.55 * half_h)]
    sigma = 0.17 * half
    shares = (0.4, 0.35, 0.25)
    counts = [int(round(deliveries * s)) for s in shares]
    counts[-1] = deliveries - sum(counts[:-1])

    edges = lattice_edges(rows, cols, spacing_m, oneway_frac, LAHORE, seed)
    records = clustered_deliveries(frame, centers_m, sigma, counts, seed=seed + 1, bounds_m=half)
    cells = population_cells(frame, 2 * max(half_w, half_h), 1000.0, centers_m,
                             sigma * 1.5, 12000.0, seed=seed + 2)
    hubs = displaced_hubs(frame, centers_m, 0.32 * half, seed=seed + 3)
    return Fixture(frame=frame, edges=edges, deliveries=records, cells=cells, hubs=hubs,
                   centers_m=centers_m)


def write_fixture(out_dir: str, edges: Sequence[EdgeRecord], deliveries: Sequence[DeliveryRecord],
                  cells: Sequence[PopulationCell], hubs: Sequence[GeoPoint]) -> Dict[str, str]:
    """Write edges.csv, deliveries.csv, population.csv and hubs.csv; returns role -> path"""
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, f"{name}.csv")
             for name in ("edges", "deliveries", "population", "hubs")}

    pd.DataFrame([{
        "edge_id": e.edge_id, "from_id": e.from_id, "to_id": e.to_id,
        "from_lon": e.from_pos.lon, "from_lat": e.from_pos.lat,
        "to_lon": e.to_pos.lon, "to_lat": e.to_pos.lat,
        "length_m": "" if e.length_m is None else e.length_m,
        "direction": e.direction, "road_class": e.road_class,
    } for e in edges], columns=["edge_id", "from_id", "to_id", "from_lon", "from_lat",
                                "to_lon", "to_lat", "length_m", "direction", "road_class"]
    ).to_csv(paths["edges"], index=False)
    pd.DataFrame({"lon": [d.pos.lon for d in deliveries], "lat": [d.pos.lat for d in deliveries],
                  "timestamp": [d.timestamp or "" for d in deliveries]}
                 ).to_csv(paths["deliveries"], index=False)
    pd.DataFrame({"lon": [c.center.lon for c in cells], "lat": [c.center.lat for c in cells],
                  "ppp": [c.ppp for c in cells]}).to_csv(paths["population"], index=False)
    pd.DataFrame({"lon": [h.lon for h in hubs], "lat": [h.lat for h in hubs],
                  "name": [f"hub_{i}" for i in range(len(hubs))]}).to_csv(paths["hubs"], index=False)

    logger.info(f"Fixture written to {out_dir}: {len(edges)} edges, {len(deliveries)} deliveries, "
                f"{len(cells)} population cells, {len(hubs)} hubs")
    return paths
