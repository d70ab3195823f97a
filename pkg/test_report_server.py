#!/usr/bin/env python3
"""
Tests for the report server endpoints
Run with pytest or directly: python test_report_server.py
"""

import json
import os
import sys
import tempfile

from fastapi.testclient import TestClient

from report_server import GEOJSON_MEDIA_TYPE, create_app
from storage import RunStorage


def _archive(tmp: str):
    storage = RunStorage(os.path.join(tmp, "archive"))
    out = os.path.join(tmp, "out")
    os.makedirs(out)
    report = {"stop_reason": "CutoffMet", "baseline_objective_m": 1500.0,
              "final_objective_m": 1100.0, "final_hubs": [{"node": 1}], "iterations": [{}]}
    with open(os.path.join(out, "report.json"), 'w') as f:
        json.dump(report, f)
    with open(os.path.join(out, "hubs.geojson"), 'w') as f:
        json.dump({"type": "FeatureCollection", "features": []}, f)
    run_id = storage.save_run(out, report, "Model Town")
    return storage, run_id


def test_root_reports_stats():
    with tempfile.TemporaryDirectory() as tmp:
        storage, _ = _archive(tmp)
        client = TestClient(create_app(storage))
        body = client.get("/").json()
    assert body["status"] == "running"
    assert body["stats"]["total_runs"] == 1


def test_list_and_search_runs():
    with tempfile.TemporaryDirectory() as tmp:
        storage, run_id = _archive(tmp)
        client = TestClient(create_app(storage))
        runs = client.get("/runs").json()["runs"]
        hits = client.get("/runs", params={"q": "model"}).json()["runs"]
        misses = client.get("/runs", params={"q": "johar"}).json()["runs"]
    assert [r["id"] for r in runs] == [run_id]
    assert len(hits) == 1 and misses == []


def test_get_run_and_geojson():
    with tempfile.TemporaryDirectory() as tmp:
        storage, run_id = _archive(tmp)
        client = TestClient(create_app(storage))
        run = client.get(f"/runs/{run_id}").json()
        hubs = client.get(f"/runs/{run_id}/hubs.geojson")
        clusters = client.get(f"/runs/{run_id}/clusters.geojson")
        missing = client.get("/runs/19700101_000000")
    assert run["report"]["final_objective_m"] == 1100.0
    assert hubs.status_code == 200
    assert hubs.headers["content-type"].startswith(GEOJSON_MEDIA_TYPE)
    assert hubs.json()["type"] == "FeatureCollection"
    assert clusters.status_code == 404
    assert missing.status_code == 404


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
