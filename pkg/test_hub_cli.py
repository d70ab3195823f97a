#!/usr/bin/env python3
"""
End-to-end tests for the hub placement CLI on a small synthetic city
Run with pytest or directly: python test_hub_cli.py
"""

import contextlib
import io
import json
import math
import os
import sys
import tempfile

import pandas as pd

import hub_cli
from storage import RunStorage

OPTIMIZE_ARTIFACTS = ("report.json", "objective.csv", "hubs.geojson", "clusters.geojson",
                      "cluster_history.geojson", "assignment.csv")


def _synth(tmp: str) -> dict:
    out = os.path.join(tmp, "fixture")
    code = hub_cli.main(["synth", "--out-dir", out, "--seed", "4", "--rows", "8", "--cols", "8",
                         "--deliveries", "300"])
    assert code == 0
    return {name: os.path.join(out, f"{name}.csv") for name in ("edges", "deliveries", "population", "hubs")}


def _optimize(fixture: dict, out_dir: str, *extra: str) -> int:
    return hub_cli.main(["optimize", "--edges", fixture["edges"], "--deliveries", fixture["deliveries"],
                         "--hubs", fixture["hubs"], "--out-dir", out_dir, *extra])


def _read_bytes(path: str) -> bytes:
    with open(path, 'rb') as f:
        return f.read()


def _read_json(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def _run_capturing_stderr(argv):
    err = io.StringIO()
    with contextlib.redirect_stderr(err):
        code = hub_cli.main(argv)
    return code, err.getvalue()


def _expect(exc_type, fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except exc_type as e:
        return e
    raise AssertionError(f"expected {exc_type.__name__}")


# ===== OPTIMIZE =====

def test_optimize_writes_all_artifacts():
    with tempfile.TemporaryDirectory() as tmp:
        fixture = _synth(tmp)
        out = os.path.join(tmp, "out")
        assert _optimize(fixture, out) == 0
        for name in OPTIMIZE_ARTIFACTS:
            assert os.path.isfile(os.path.join(out, name)), name

        report = _read_json(os.path.join(out, "report.json"))
        assert report["stop_reason"] in ("CutoffMet", "MaxIterations")
        assert report["final_objective_m"] <= report["baseline_objective_m"] + 1e-9
        assert len(report["final_hubs"]) == 3
        assert set(report["manifest"]["inputs"]) == {"edges", "deliveries", "hubs"}
        assert report["manifest"]["config"]["alpha"] == 1.0

        objectives = pd.read_csv(os.path.join(out, "objective.csv"))["objective_m"].tolist()
        assert all(b <= a + 1e-9 for a, b in zip(objectives, objectives[1:]))


def test_optimize_is_byte_deterministic():
    with tempfile.TemporaryDirectory() as tmp:
        fixture = _synth(tmp)
        a, b = os.path.join(tmp, "a"), os.path.join(tmp, "b")
        assert _optimize(fixture, a) == 0
        assert _optimize(fixture, b) == 0
        for name in OPTIMIZE_ARTIFACTS:
            assert _read_bytes(os.path.join(a, name)) == _read_bytes(os.path.join(b, name)), name


def test_alpha_one_ignores_population():
    with tempfile.TemporaryDirectory() as tmp:
        fixture = _synth(tmp)
        a, b = os.path.join(tmp, "a"), os.path.join(tmp, "b")
        assert _optimize(fixture, a, "--alpha", "1") == 0
        assert _optimize(fixture, b, "--alpha", "1", "--population", fixture["population"]) == 0
        assert _read_bytes(os.path.join(a, "report.json")) == _read_bytes(os.path.join(b, "report.json"))


def test_blended_run_records_population():
    with tempfile.TemporaryDirectory() as tmp:
        fixture = _synth(tmp)
        out = os.path.join(tmp, "out")
        assert _optimize(fixture, out, "--alpha", "0.5", "--population", fixture["population"]) == 0
        report = _read_json(os.path.join(out, "report.json"))
        assert "population" in report["manifest"]["inputs"]
        assert report["manifest"]["config"]["alpha"] == 0.5


def test_blend_without_population_fails():
    with tempfile.TemporaryDirectory() as tmp:
        fixture = _synth(tmp)
        code, err = _run_capturing_stderr(["optimize", "--edges", fixture["edges"],
                                           "--deliveries", fixture["deliveries"],
                                           "--hubs", fixture["hubs"], "--alpha", "0.5",
                                           "--out-dir", os.path.join(tmp, "out")])
        assert code == 1
        error = json.loads(err.strip().splitlines()[-1])
        assert error["error"] == "DemandDataError"
        assert not os.path.exists(os.path.join(tmp, "out"))


def test_missing_required_argument_exits_1():
    e = _expect(SystemExit, hub_cli.main, ["optimize", "--deliveries", "d.csv", "--hubs", "h.csv"])
    assert e.code == 1


def test_baseline_rejects_loop_flags():
    for flag, value in (("--max-iter", "3"), ("--cutoff-m", "5"), ("--grid-res-m", "500")):
        e = _expect(SystemExit, hub_cli.main, ["baseline", "--edges", "e.csv", "--deliveries", "d.csv",
                                               "--hubs", "h.csv", flag, value])
        assert e.code == 1, flag


def test_unreadable_input_returns_1():
    with tempfile.TemporaryDirectory() as tmp:
        code, err = _run_capturing_stderr(["optimize", "--edges", os.path.join(tmp, "missing.csv"),
                                           "--deliveries", "d.csv", "--hubs", "h.csv",
                                           "--out-dir", os.path.join(tmp, "out")])
    assert code == 1
    assert json.loads(err.strip().splitlines()[-1])["error"] == "FileNotFoundError"


def test_bad_edge_row_reported():
    with tempfile.TemporaryDirectory() as tmp:
        fixture = _synth(tmp)
        df = pd.read_csv(fixture["edges"], dtype=str, keep_default_na=False)
        df.loc[3, "length_m"] = "-5"
        df.to_csv(fixture["edges"], index=False)
        code, err = _run_capturing_stderr(["baseline", "--edges", fixture["edges"],
                                           "--deliveries", fixture["deliveries"],
                                           "--hubs", fixture["hubs"],
                                           "--out-dir", os.path.join(tmp, "out")])
    assert code == 1
    error = json.loads(err.strip().splitlines()[-1])
    assert error["error"] == "RoadDataError"
    assert error["row"] == 5


def test_archive_copies_run():
    with tempfile.TemporaryDirectory() as tmp:
        fixture = _synth(tmp)
        archive = os.path.join(tmp, "archive")
        saved = hub_cli.RUNS_DIR
        hub_cli.RUNS_DIR = archive
        try:
            assert _optimize(fixture, os.path.join(tmp, "out"), "--archive", "--title", "synthetic") == 0
        finally:
            hub_cli.RUNS_DIR = saved
        runs = RunStorage(archive).list_runs()
        assert len(runs) == 1
        assert runs[0]["title"] == "synthetic"
        assert RunStorage(archive).run_path(runs[0]["id"], "hubs.geojson")


# ===== BASELINE =====

def test_baseline_of_final_hubs_matches_final_objective():
    with tempfile.TemporaryDirectory() as tmp:
        fixture = _synth(tmp)
        out = os.path.join(tmp, "out")
        assert _optimize(fixture, out) == 0
        report = _read_json(os.path.join(out, "report.json"))
        final_hubs = os.path.join(tmp, "final_hubs.csv")
        pd.DataFrame({"lon": [h["lon"] for h in report["final_hubs"]],
                      "lat": [h["lat"] for h in report["final_hubs"]]}).to_csv(final_hubs, index=False)

        base_out = os.path.join(tmp, "base")
        assert hub_cli.main(["baseline", "--edges", fixture["edges"], "--deliveries", fixture["deliveries"],
                             "--hubs", final_hubs, "--out-dir", base_out]) == 0
        baseline = _read_json(os.path.join(base_out, "baseline.json"))
        assert baseline["objective_m"] == report["final_objective_m"]
        assert baseline["assignment"] == report["final_assignment"]


def test_baseline_of_initial_hubs_matches_first_iteration():
    with tempfile.TemporaryDirectory() as tmp:
        fixture = _synth(tmp)
        assert _optimize(fixture, os.path.join(tmp, "out")) == 0
        assert hub_cli.main(["baseline", "--edges", fixture["edges"], "--deliveries", fixture["deliveries"],
                             "--hubs", fixture["hubs"], "--out-dir", os.path.join(tmp, "base")]) == 0
        report = _read_json(os.path.join(tmp, "out", "report.json"))
        baseline = _read_json(os.path.join(tmp, "base", "baseline.json"))
        assert baseline["objective_m"] == report["baseline_objective_m"]
        assert sum(baseline["cluster_sizes"]) == report["demand"]["points"]


# ===== OD MATRIX =====

def _write_edges(path: str, rows):
    pd.DataFrame(rows, columns=["edge_id", "from_id", "to_id", "from_lon", "from_lat", "to_lon",
                                "to_lat", "length_m", "direction", "road_class"]).to_csv(path, index=False)


def test_odmatrix_two_way_is_symmetric():
    with tempfile.TemporaryDirectory() as tmp:
        edges = os.path.join(tmp, "edges.csv")
        _write_edges(edges, [
            ("e1", "a", "b", 74.300, 31.500, 74.310, 31.500, 950, "None", "local"),
            ("e2", "b", "c", 74.310, 31.500, 74.310, 31.510, 1110, "None", "local"),
            ("e3", "a", "c", 74.300, 31.500, 74.310, 31.510, 2500, "None", "primary"),
        ])
        points = os.path.join(tmp, "points.csv")
        pd.DataFrame({"lon": [74.300, 74.310, 74.310], "lat": [31.500, 31.500, 31.510],
                      "name": ["a", "b", "c"]}).to_csv(points, index=False)
        out = os.path.join(tmp, "od")
        assert hub_cli.main(["odmatrix", "--edges", edges, "--origins", points,
                             "--destinations", points, "--out-dir", out]) == 0
        table = pd.read_csv(os.path.join(out, "od.csv"), index_col=0)
    assert table.loc["a", "c"] == 2060.0
    assert (table.values == table.values.T).all()
    assert all(table.loc[n, n] == 0.0 for n in "abc")


def test_odmatrix_one_way_pair():
    with tempfile.TemporaryDirectory() as tmp:
        edges = os.path.join(tmp, "edges.csv")
        _write_edges(edges, [("e1", "a", "b", 74.300, 31.500, 74.301, 31.500, 5, "EB", "local")])
        points = os.path.join(tmp, "points.csv")
        pd.DataFrame({"lon": [74.300, 74.301], "lat": [31.500, 31.500],
                      "name": ["a", "b"]}).to_csv(points, index=False)
        out = os.path.join(tmp, "od")
        assert hub_cli.main(["odmatrix", "--edges", edges, "--origins", points,
                             "--destinations", points, "--out-dir", out]) == 0
        table = pd.read_csv(os.path.join(out, "od.csv"), index_col=0)
    assert table.loc["a", "b"] == 5.0
    assert math.isinf(table.loc["b", "a"])
    assert table.loc["a", "a"] == 0.0 and table.loc["b", "b"] == 0.0


# ===== P-MEDIAN, SWEEP, COMPARE =====

def test_pmedian_exact_is_verified():
    with tempfile.TemporaryDirectory() as tmp:
        fixture = _synth(tmp)
        out = os.path.join(tmp, "pm")
        assert hub_cli.main(["pmedian", "--edges", fixture["edges"], "--deliveries", fixture["deliveries"],
                             "--hubs", fixture["hubs"], "--p", "2", "--solver", "exact",
                             "--out-dir", out]) == 0
        result = _read_json(os.path.join(out, "pmedian.json"))
        hubs = _read_json(os.path.join(out, "hubs.geojson"))
    assert result["verification"]["ok"]
    assert len(result["solution"]["open"]) == 2
    assert len(hubs["features"]) == 2
    assert len({c["node"] for c in result["candidates"]}) == len(result["candidates"])
    assert result["objective_m"] > 0


def test_sweep_tabulates_hub_shift():
    with tempfile.TemporaryDirectory() as tmp:
        fixture = _synth(tmp)
        out = os.path.join(tmp, "sweep")
        assert hub_cli.main(["sweep", "--edges", fixture["edges"], "--deliveries", fixture["deliveries"],
                             "--hubs", fixture["hubs"], "--population", fixture["population"],
                             "--alphas", "1,0", "--out-dir", out]) == 0
        sweep = _read_json(os.path.join(out, "sweep.json"))
        shift = pd.read_csv(os.path.join(out, "shift.csv"))
    assert [r["alpha"] for r in sweep["runs"]] == [1.0, 0.0]
    assert len(shift) == len(sweep["runs"][0]["final_hubs"])
    assert (shift["distance_m"] >= 0).all()


def test_compare_report_with_itself():
    with tempfile.TemporaryDirectory() as tmp:
        fixture = _synth(tmp)
        out = os.path.join(tmp, "out")
        assert _optimize(fixture, out) == 0
        report = os.path.join(out, "report.json")
        cmp_out = os.path.join(tmp, "cmp")
        assert hub_cli.main(["compare", "--edges", fixture["edges"], "--from-report", report,
                             "--to-report", report, "--out-dir", cmp_out]) == 0
        table = pd.read_csv(os.path.join(cmp_out, "compare.csv"))
    assert (table["distance_m"] == 0.0).all()
    assert (table["from_node"] == table["to_node"]).all()


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
