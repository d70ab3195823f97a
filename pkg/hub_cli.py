#!/usr/bin/env python3
"""
Hub Placement CLI
Optimizes logistics hub locations on a road network, evaluates existing hubs,
and produces OD matrices, p-median solutions, alpha sweeps and fixtures.

Usage:
    python hub_cli.py optimize --edges edges.csv --deliveries deliveries.csv --hubs hubs.csv
    python hub_cli.py baseline --edges edges.csv --deliveries deliveries.csv --hubs hubs.csv
    python hub_cli.py odmatrix --edges edges.csv --origins a.csv --destinations b.csv
    python hub_cli.py pmedian  --edges edges.csv --deliveries deliveries.csv --p 3
    python hub_cli.py sweep    --edges edges.csv --deliveries deliveries.csv --hubs hubs.csv \\
                               --population population.csv --alphas 1,0.5,0
    python hub_cli.py compare  --edges edges.csv --from-report a/report.json --to-report b/report.json
    python hub_cli.py synth    --out-dir fixture
"""

import argparse
import json
import logging
import math
import os
import sys
from typing import Dict, List, Optional, Sequence

import pandas as pd

import cli_io
from candidate_grid import frame_for_graph, generate_candidates
from config import (DEFAULT_ALPHA, DEFAULT_CELL_SIZE_M, DEFAULT_CUTOFF_M, DEFAULT_EXACT_CAP,
                    DEFAULT_EXCLUDED_CLASSES, DEFAULT_GRID_RES_M, DEFAULT_MAX_ITER,
                    DEFAULT_MAX_SNAP_M, DEFAULT_NORM, DEFAULT_SNAP_POLICY, NORM_SCHEMES,
                    RUNS_DIR, SNAP_POLICIES)
from demand import (DemandDataError, DemandSet, WeightBlend, build_phase1_demand,
                    build_phase2_demand)
from hub_optimizer import (HubSite, OptimizerConfig, OptimizerError, baseline_report,
                           compare_hub_sets, run_with_restarts)
from median_solver import (MedianProblem, problem_to_dict, solution_to_dict, solve_pmedian,
                           solve_pmedian_exact, solve_pmedian_interchange, verify_solution)
from road_graph import RoadGraph, load_road_graph, od_matrix, snap_to_node
from storage import RunStorage
from synthetic import lahore_analogue, write_fixture

logger = logging.getLogger("hub_cli")


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1 like every other failure"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Shared pipeline pieces
# ---------------------------------------------------------------------------

def _excluded(text: str) -> List[str]:
    return sorted({c.strip().lower() for c in (text or "").split(",") if c.strip()})


def _load_graph(args) -> RoadGraph:
    return load_road_graph(cli_io.read_edges_csv(args.edges), set(_excluded(args.exclude_classes)))


def _config(args) -> OptimizerConfig:
    cfg = OptimizerConfig(
        max_iter=args.max_iter,
        cutoff_m=args.cutoff_m,
        grid_res_m=args.grid_res_m,
        max_snap_m=args.max_snap_m,
        snap_policy=args.snap_policy,
    )
    cfg.validate()
    return cfg


def _build_demand(args, g: RoadGraph, frame, records, alpha: float, cells=None) -> DemandSet:
    """Phase 1 (deliveries only) at alpha = 1, blended phase 2 otherwise"""
    if alpha == 1.0:
        return build_phase1_demand(g, records, args.max_snap_m, args.snap_policy)
    if cells is None:
        raise DemandDataError(f"--population is required when alpha < 1 (got alpha={alpha})")
    return build_phase2_demand(g, frame, records, cells, WeightBlend(alpha), args.max_snap_m,
                               args.snap_policy, args.norm, args.cell_size_m)


def _read_cells(args, alphas: Sequence[float]):
    if any(a < 1.0 for a in alphas) and args.population:
        return cli_io.read_population_csv(args.population)
    return None


def _run_config(args, alphas: Sequence[float], cfg: Optional[OptimizerConfig] = None) -> Dict:
    echo = {
        "excluded_classes": _excluded(args.exclude_classes),
        "snap_policy": args.snap_policy,
        "max_snap_m": args.max_snap_m,
    }
    if alphas:
        echo.update(alpha=alphas[0] if len(alphas) == 1 else list(alphas),
                    norm=args.norm, cell_size_m=args.cell_size_m)
    if cfg is not None:
        echo.update(grid_res_m=cfg.grid_res_m, cutoff_m=cfg.cutoff_m, max_iter=cfg.max_iter)
    for name in ("restarts", "seed", "p", "solver"):
        if hasattr(args, name):
            echo[name] = getattr(args, name)
    return echo


def _inputs(args, alphas: Sequence[float]) -> Dict[str, Optional[str]]:
    inputs = {"edges": args.edges, "deliveries": getattr(args, "deliveries", None),
              "hubs": getattr(args, "hubs", None)}
    if any(a < 1.0 for a in alphas):
        inputs["population"] = args.population
    return inputs


def _alpha(value: float) -> float:
    return WeightBlend(float(value)).alpha


def _banner(title: str, lines: Sequence[str]):
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60)
    for line in lines:
        print(line)
    print("=" * 60)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_optimize(args) -> int:
    """Network K-Means with 1-median centroid updates; writes the full artifact set"""
    alpha = _alpha(args.alpha)
    cfg = _config(args)
    g = _load_graph(args)
    frame = frame_for_graph(g)
    records = cli_io.read_deliveries_csv(args.deliveries)
    hubs, _ = cli_io.read_hubs_csv(args.hubs)
    demand = _build_demand(args, g, frame, records, alpha, _read_cells(args, [alpha]))

    report = run_with_restarts(g, frame, demand.points, hubs, cfg, args.restarts, args.seed)
    manifest = cli_io.build_manifest(_inputs(args, [alpha]), _run_config(args, [alpha], cfg))
    report_dict = cli_io.report_to_dict(report, manifest, cli_io.demand_summary(demand))
    final_nodes = [h.node for h in report.final_hubs]

    with cli_io.atomic_output_dir(args.out_dir) as tmp:
        cli_io.write_json(os.path.join(tmp, "report.json"), report_dict)
        cli_io.write_objective_csv(os.path.join(tmp, "objective.csv"), report.iterations)
        cli_io.write_geojson(os.path.join(tmp, "hubs.geojson"),
                             cli_io.hubs_geojson(report.final_hubs, report.hub_summaries))
        cli_io.write_geojson(os.path.join(tmp, "clusters.geojson"),
                             cli_io.clusters_geojson(frame, demand.points, report.final_assignment,
                                                     final_nodes))
        cli_io.write_geojson(os.path.join(tmp, "cluster_history.geojson"),
                             cli_io.cluster_history_geojson(frame, demand.points, report.iterations))
        cli_io.write_assignment_csv(os.path.join(tmp, "assignment.csv"), demand.points,
                                    report.final_assignment)

    run_id = None
    if args.archive:
        run_id = RunStorage(RUNS_DIR).save_run(args.out_dir, report_dict, args.title)

    saving = report.baseline_objective_m - report.final_objective_m
    lines = [
        f"Demand points: {len(demand)} ({demand.total_count} deliveries, alpha={alpha})",
        f"Hubs: {len(report.final_hubs)}",
        f"Iterations: {len(report.iterations)} ({report.stop_reason})",
        f"Initial objective: {report.baseline_objective_m:.1f} m per delivery",
        f"Final objective:   {report.final_objective_m:.1f} m per delivery",
        f"Saving: {saving:.1f} m per delivery",
        f"Output: {args.out_dir}",
    ]
    if run_id:
        lines.append(f"Archived as: {run_id}")
    _banner("✅ HUB OPTIMIZATION COMPLETE", lines)
    return 0


def cmd_baseline(args) -> int:
    """Objective of the existing hubs with nearest-hub assignment"""
    alpha = _alpha(args.alpha)
    cfg = OptimizerConfig(max_snap_m=args.max_snap_m, snap_policy=args.snap_policy)
    cfg.validate()
    g = _load_graph(args)
    frame = frame_for_graph(g)
    records = cli_io.read_deliveries_csv(args.deliveries)
    hubs, _ = cli_io.read_hubs_csv(args.hubs)
    demand = _build_demand(args, g, frame, records, alpha, _read_cells(args, [alpha]))

    report = baseline_report(g, demand.points, hubs, cfg)
    manifest = cli_io.build_manifest(_inputs(args, [alpha]), _run_config(args, [alpha]))

    with cli_io.atomic_output_dir(args.out_dir) as tmp:
        cli_io.write_json(os.path.join(tmp, "baseline.json"),
                          cli_io.baseline_to_dict(report, manifest, cli_io.demand_summary(demand)))
        cli_io.write_geojson(os.path.join(tmp, "hubs.geojson"),
                             cli_io.hubs_geojson(report.hubs, report.hub_summaries))
        cli_io.write_geojson(os.path.join(tmp, "clusters.geojson"),
                             cli_io.clusters_geojson(frame, demand.points, report.assignment,
                                                     [h.node for h in report.hubs]))

    _banner("✅ BASELINE COMPLETE", [
        f"Hubs: {len(report.hubs)} (cluster sizes {report.cluster_sizes})",
        f"Objective: {report.objective_m:.1f} m per delivery",
        f"Output: {args.out_dir}",
    ])
    return 0


def cmd_odmatrix(args) -> int:
    """Shortest road distances between two point sets"""
    g = _load_graph(args)
    origins, origin_names = cli_io.read_points_csv(args.origins)
    destinations, destination_names = cli_io.read_points_csv(args.destinations)
    matrix = od_matrix(g,
                       [snap_to_node(g, p, args.max_snap_m) for p in origins],
                       [snap_to_node(g, p, args.max_snap_m) for p in destinations])

    with cli_io.atomic_output_dir(args.out_dir) as tmp:
        cli_io.write_od_csv(os.path.join(tmp, "od.csv"), matrix, origin_names, destination_names)

    unreachable = int(sum(1 for v in matrix.d.flat if math.isinf(v)))
    _banner("✅ OD MATRIX COMPLETE", [
        f"Origins: {len(origins)}  Destinations: {len(destinations)}",
        f"Unreachable pairs: {unreachable}",
        f"Output: {os.path.join(args.out_dir, 'od.csv')}",
    ])
    return 0


def cmd_pmedian(args) -> int:
    """One-shot p-median over the whole demand set and the dataset-wide candidate grid"""
    alpha = _alpha(args.alpha)
    g = _load_graph(args)
    frame = frame_for_graph(g)
    records = cli_io.read_deliveries_csv(args.deliveries)
    demand = _build_demand(args, g, frame, records, alpha, _read_cells(args, [alpha]))
    if not len(demand):
        raise OptimizerError("no demand points to serve")

    sites = generate_candidates(g, frame, demand.points, args.grid_res_m, None, args.max_snap_m)
    candidates = [{"node": s.node, "lon": s.cell_center.lon, "lat": s.cell_center.lat,
                   "origin": s.origin} for s in sites]
    if args.hubs:
        known = {c["node"] for c in candidates}
        for p in cli_io.read_hubs_csv(args.hubs)[0]:
            node = snap_to_node(g, p, args.max_snap_m)
            if node not in known:
                known.add(node)
                candidates.append({"node": node, "lon": p.lon, "lat": p.lat, "origin": "ExistingHub"})
    if not candidates:
        raise OptimizerError("no candidate site snaps to the road network")

    nodes = [c["node"] for c in candidates]
    prob = MedianProblem(demand_weights=[p.weight for p in demand],
                         d=od_matrix(g, nodes, [p.node for p in demand]).d.T, p=args.p)
    if args.solver == "exact":
        solution = solve_pmedian_exact(prob, args.exact_cap)
    elif args.solver == "interchange":
        solution = solve_pmedian_interchange(prob, args.seed)
    else:
        solution = solve_pmedian(prob, args.exact_cap, args.seed)
    check = verify_solution(prob, solution)
    objective_m = solution.cost / math.fsum(p.weight for p in demand)

    hubs = [HubSite(cluster=k, node=nodes[j], pos=g.nodes[nodes[j]].pos)
            for k, j in enumerate(solution.open)]
    manifest = cli_io.build_manifest(_inputs(args, [alpha]), _run_config(args, [alpha]))
    manifest["config"]["grid_res_m"] = args.grid_res_m

    with cli_io.atomic_output_dir(args.out_dir) as tmp:
        cli_io.write_json(os.path.join(tmp, "pmedian.json"), {
            "manifest": manifest,
            "demand": cli_io.demand_summary(demand),
            "candidates": candidates,
            "problem": problem_to_dict(prob),
            "solution": solution_to_dict(solution),
            "objective_m": objective_m,
            "verification": {"ok": check.ok, "reasons": check.reasons},
        })
        cli_io.write_geojson(os.path.join(tmp, "hubs.geojson"), cli_io.hubs_geojson(hubs))

    _banner("✅ P-MEDIAN COMPLETE", [
        f"Candidates: {len(candidates)}  Demand points: {len(demand)}  p={prob.p}",
        f"Open sites: {[nodes[j] for j in solution.open]}",
        f"Objective: {objective_m:.1f} m per delivery",
        f"Verified: {'yes' if check.ok else 'NO ' + '; '.join(check.reasons)}",
        f"Output: {args.out_dir}",
    ])
    return 0


def cmd_sweep(args) -> int:
    """Optimize once per alpha and tabulate how far the hubs move"""
    alphas = [_alpha(a) for a in args.alphas.split(",") if a.strip()]
    if not alphas:
        raise DemandDataError("--alphas lists no values")
    cfg = _config(args)
    g = _load_graph(args)
    frame = frame_for_graph(g)
    records = cli_io.read_deliveries_csv(args.deliveries)
    hubs, _ = cli_io.read_hubs_csv(args.hubs)
    cells = _read_cells(args, alphas)

    runs = []
    reports = []
    for alpha in alphas:
        demand = _build_demand(args, g, frame, records, alpha, cells)
        report = run_with_restarts(g, frame, demand.points, hubs, cfg, args.restarts, args.seed)
        reports.append(report)
        runs.append({
            "alpha": alpha,
            "final_hubs": [{"cluster": h.cluster, "node": h.node, "lon": h.pos.lon, "lat": h.pos.lat}
                           for h in report.final_hubs],
            "final_objective_m": report.final_objective_m,
            "stop_reason": report.stop_reason,
            "iterations": len(report.iterations),
            "objective_m": [s.objective_m for s in report.iterations],
        })

    rows = []
    first = [h.node for h in reports[0].final_hubs]
    for alpha, report in zip(alphas[1:], reports[1:]):
        for shift in compare_hub_sets(g, first, [h.node for h in report.final_hubs]):
            rows.append({"alpha": alpha, "from_cluster": shift.from_cluster,
                         "from_node": shift.from_node, "to_cluster": shift.to_cluster,
                         "to_node": shift.to_node, "distance_m": shift.distance_m})

    manifest = cli_io.build_manifest(_inputs(args, alphas), _run_config(args, alphas, cfg))
    with cli_io.atomic_output_dir(args.out_dir) as tmp:
        cli_io.write_json(os.path.join(tmp, "sweep.json"), {"manifest": manifest, "runs": runs})
        pd.DataFrame(rows, columns=["alpha", "from_cluster", "from_node", "to_cluster",
                                    "to_node", "distance_m"]
                     ).to_csv(os.path.join(tmp, "shift.csv"), index=False)

    _banner("✅ ALPHA SWEEP COMPLETE", [
        *(f"alpha={r['alpha']}: {r['final_objective_m']:.1f} m per delivery "
          f"({r['iterations']} iterations, {r['stop_reason']})" for r in runs),
        f"Output: {args.out_dir}",
    ])
    return 0


def cmd_compare(args) -> int:
    """Road distance from each hub of one report to the nearest hub of another"""
    g = _load_graph(args)
    from_report, _ = cli_io.read_report_json(args.from_report)
    to_report, _ = cli_io.read_report_json(args.to_report)
    from_nodes = [snap_to_node(g, h.pos, args.max_snap_m) for h in from_report.final_hubs]
    to_nodes = [snap_to_node(g, h.pos, args.max_snap_m) for h in to_report.final_hubs]
    shifts = compare_hub_sets(g, from_nodes, to_nodes)

    with cli_io.atomic_output_dir(args.out_dir) as tmp:
        pd.DataFrame([{"from_cluster": s.from_cluster, "from_node": s.from_node,
                       "to_cluster": s.to_cluster, "to_node": s.to_node,
                       "distance_m": s.distance_m} for s in shifts],
                     columns=["from_cluster", "from_node", "to_cluster", "to_node", "distance_m"]
                     ).to_csv(os.path.join(tmp, "compare.csv"), index=False)

    _banner("✅ HUB COMPARISON COMPLETE", [
        *(f"hub {s.from_cluster} -> hub {s.to_cluster}: {s.distance_m:.0f} m" for s in shifts),
        f"Output: {os.path.join(args.out_dir, 'compare.csv')}",
    ])
    return 0


def cmd_synth(args) -> int:
    """Write a synthetic city fixture"""
    fixture = lahore_analogue(seed=args.seed, rows=args.rows, cols=args.cols,
                              spacing_m=args.spacing_m, oneway_frac=args.oneway_frac,
                              deliveries=args.deliveries)
    with cli_io.atomic_output_dir(args.out_dir) as tmp:
        write_fixture(tmp, fixture.edges, fixture.deliveries, fixture.cells, fixture.hubs)

    _banner("✅ FIXTURE WRITTEN", [
        f"Edges: {len(fixture.edges)}  Deliveries: {len(fixture.deliveries)}",
        f"Population cells: {len(fixture.cells)}  Hubs: {len(fixture.hubs)}",
        f"Output: {args.out_dir}",
    ])
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_graph_args(p):
    p.add_argument("--edges", required=True, help="Road edge CSV")
    p.add_argument("--exclude-classes", default=",".join(DEFAULT_EXCLUDED_CLASSES),
                   help="Comma-separated road classes to drop (default: motorway,metro)")
    p.add_argument("--max-snap-m", type=float, default=DEFAULT_MAX_SNAP_M,
                   help="Largest point-to-node snapping distance in meters")


def _add_demand_args(p, hubs_required: bool = True):
    p.add_argument("--deliveries", required=True, help="Delivery CSV (lon,lat[,timestamp])")
    p.add_argument("--hubs", required=hubs_required, help="Hub CSV (lon,lat[,name])")
    p.add_argument("--population", help="Population cell CSV (lon,lat,ppp)")
    p.add_argument("--norm", choices=NORM_SCHEMES, default=DEFAULT_NORM)
    p.add_argument("--cell-size-m", type=float, default=DEFAULT_CELL_SIZE_M,
                   help="Population cell edge length used to bin deliveries")
    p.add_argument("--snap-policy", choices=SNAP_POLICIES, default=DEFAULT_SNAP_POLICY)


def _add_optimizer_args(p):
    p.add_argument("--grid-res-m", type=float, default=DEFAULT_GRID_RES_M)
    p.add_argument("--cutoff-m", type=float, default=DEFAULT_CUTOFF_M)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--restarts", type=int, default=0, help="Extra runs from random demand points")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = _ArgumentParser(prog="hub_cli", description="Logistics hub placement on road networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", parents=[common], help="Optimize hub locations")
    _add_graph_args(p)
    _add_demand_args(p)
    _add_optimizer_args(p)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA,
                   help="Delivery share of the demand weight (1 = deliveries only)")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--archive", action="store_true", help="Copy the run into the run archive")
    p.add_argument("--title", help="Archive title")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("baseline", parents=[common], help="Evaluate existing hubs")
    _add_graph_args(p)
    _add_demand_args(p)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--out-dir", default="out_baseline")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("odmatrix", parents=[common], help="Origin-destination road distances")
    _add_graph_args(p)
    p.add_argument("--origins", required=True, help="Origin CSV (lon,lat[,name])")
    p.add_argument("--destinations", required=True, help="Destination CSV (lon,lat[,name])")
    p.add_argument("--out-dir", default="out_od")
    p.set_defaults(func=cmd_odmatrix)

    p = sub.add_parser("pmedian", parents=[common], help="Solve a p-median over the whole dataset")
    _add_graph_args(p)
    _add_demand_args(p, hubs_required=False)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--grid-res-m", type=float, default=DEFAULT_GRID_RES_M)
    p.add_argument("--p", type=int, default=1, help="Number of hubs to open")
    p.add_argument("--solver", choices=("auto", "exact", "interchange"), default="auto")
    p.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out_pmedian")
    p.set_defaults(func=cmd_pmedian)

    p = sub.add_parser("sweep", parents=[common], help="Optimize for several alpha values")
    _add_graph_args(p)
    _add_demand_args(p)
    _add_optimizer_args(p)
    p.add_argument("--alphas", default="1,0.5,0", help="Comma-separated alpha values")
    p.add_argument("--out-dir", default="out_sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", parents=[common], help="Hub shift between two reports")
    _add_graph_args(p)
    p.add_argument("--from-report", required=True)
    p.add_argument("--to-report", required=True)
    p.add_argument("--out-dir", default="out_compare")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", parents=[common], help="Write a synthetic city fixture")
    p.add_argument("--out-dir", default="fixture")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rows", type=int, default=20)
    p.add_argument("--cols", type=int, default=20)
    p.add_argument("--spacing-m", type=float, default=500.0)
    p.add_argument("--oneway-frac", type=float, default=0.1)
    p.add_argument("--deliveries", type=int, default=2000)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="[%(levelname)s] %(message)s", force=True)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as e:
        error = {"error": type(e).__name__, "message": str(e), "row": getattr(e, "row", None)}
        logger.error(f"{error['error']}: {error['message']}")
        print(json.dumps(error), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
