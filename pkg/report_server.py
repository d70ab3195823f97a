#!/usr/bin/env python3
"""
Report Server
Read-only HTTP view of the run archive: list runs, fetch reports and serve
the hub / cluster GeoJSON layers for map viewers
"""

import json
import logging
from typing import Optional

import uvicorn
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from config import RUNS_DIR, SERVER_HOST, SERVER_PORT, TOOL_VERSION
from storage import RunStorage

logger = logging.getLogger(__name__)

GEOJSON_MEDIA_TYPE = "application/geo+json"


def create_app(storage: Optional[RunStorage] = None) -> FastAPI:
    storage = storage or RunStorage(RUNS_DIR)
    app = FastAPI(title="Hub Placement Reports", version=TOOL_VERSION)

    def _geojson(run_id: str, artifact: str) -> JSONResponse:
        path = storage.run_path(run_id, artifact)
        if path is None:
            raise HTTPException(status_code=404, detail=f"{artifact} not found for run {run_id}")
        with open(path, 'r') as f:
            return JSONResponse(content=json.load(f), media_type=GEOJSON_MEDIA_TYPE)

    @app.get("/")
    async def root():
        """Health check plus archive statistics"""
        return {
            "status": "running",
            "service": "Hub Placement Reports",
            "version": TOOL_VERSION,
            "stats": storage.get_stats(),
        }

    @app.get("/runs")
    async def list_runs(limit: Optional[int] = None, q: Optional[str] = None):
        """Archived runs, newest first; `q` filters by title"""
        runs = storage.search_runs(q) if q else storage.list_runs()
        if limit:
            runs = runs[:limit]
        return {"runs": runs}

    @app.get("/runs/{run_id}")
    async def get_run(run_id: str):
        run = storage.get_run(run_id)
        if run is None:
            raise HTTPException(status_code=404, detail=f"run {run_id} not found")
        return run

    @app.get("/runs/{run_id}/hubs.geojson")
    async def run_hubs(run_id: str):
        return _geojson(run_id, "hubs.geojson")

    @app.get("/runs/{run_id}/clusters.geojson")
    async def run_clusters(run_id: str):
        return _geojson(run_id, "clusters.geojson")

    return app


def main():
    logging.basicConfig(level=logging.INFO, format="[%(levelname)s] %(message)s")
    storage = RunStorage(RUNS_DIR)
    app = create_app(storage)

    print("=" * 60)
    print("🗺️  HUB PLACEMENT REPORT SERVER")
    print("=" * 60)
    print(f"Address: http://{SERVER_HOST}:{SERVER_PORT}/runs")
    print(f"Archive: {RUNS_DIR}")
    print(f"Stats: {storage.get_stats()}")
    print("=" * 60)

    uvicorn.run(app, host=SERVER_HOST, port=SERVER_PORT)


if __name__ == "__main__":
    main()
