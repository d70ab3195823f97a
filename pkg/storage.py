#!/usr/bin/env python3
"""
Run Archive for hub placement
Keeps finished optimization runs (report + artifacts) on the filesystem
behind a small JSON index
"""

import os
import json
import logging
import shutil
from datetime import datetime
from typing import Dict, List, Optional

from config import RUNS_DIR

logger = logging.getLogger(__name__)


class RunStorage:
    def __init__(self, base_dir: str = RUNS_DIR):
        self.base_dir = base_dir
        self.runs_dir = os.path.join(base_dir, "runs")
        self.index_file = os.path.join(base_dir, "runs.json")

        os.makedirs(self.runs_dir, exist_ok=True)
        if not os.path.exists(self.index_file):
            self._save_index([])

    def _save_index(self, index: List[Dict]):
        """Save the index file"""
        with open(self.index_file, 'w') as f:
            json.dump(index, f, indent=2)

    def _load_index(self) -> List[Dict]:
        """Load the index file (empty when missing or unreadable)"""
        try:
            with open(self.index_file, 'r') as f:
                return json.load(f)
        except (OSError, ValueError):
            return []

    def _new_run_id(self, timestamp: datetime) -> str:
        base = timestamp.strftime("%Y%m%d_%H%M%S")
        run_id, n = base, 1
        while os.path.exists(os.path.join(self.runs_dir, run_id)):
            run_id = f"{base}_{n}"
            n += 1
        return run_id

    def save_run(self, out_dir: str, report: Dict, title: Optional[str] = None) -> str:
        """
        Archive a finished run

        Args:
            out_dir: Directory holding the run's artifacts (copied as-is)
            report: The run's report dict (as written to report.json)
            title: Human-readable title (optional)

        Returns:
            run_id: Unique ID for this run
        """
        timestamp = datetime.now()
        run_id = self._new_run_id(timestamp)
        run_dir = os.path.join(self.runs_dir, run_id)
        shutil.copytree(out_dir, run_dir)

        entry = {
            "id": run_id,
            "title": title or f"Run {run_id}",
            "timestamp": timestamp.isoformat(),
            "stop_reason": report.get("stop_reason"),
            "baseline_objective_m": report.get("baseline_objective_m"),
            "final_objective_m": report.get("final_objective_m"),
            "num_hubs": len(report.get("final_hubs", [])),
            "iterations": len(report.get("iterations", [])),
            "artifacts": sorted(os.listdir(run_dir)),
        }
        with open(os.path.join(run_dir, "metadata.json"), 'w') as f:
            json.dump(entry, f, indent=2)

        index = self._load_index()
        index.append(entry)
        self._save_index(index)

        logger.info(f"Archived run {run_id}: {entry['title']}")
        return run_id

    def run_path(self, run_id: str, artifact: str) -> Optional[str]:
        """Path of one archived artifact, None when the run or file is missing"""
        for name in (run_id, artifact):
            if name in ("", ".", "..") or os.path.basename(name) != name:
                return None
        if run_id not in {item["id"] for item in self._load_index()}:
            return None
        path = os.path.join(self.runs_dir, run_id, artifact)
        return path if os.path.isfile(path) else None

    def get_run(self, run_id: str) -> Optional[Dict]:
        """Run metadata with its full report, None when unknown"""
        metadata_path = self.run_path(run_id, "metadata.json")
        if metadata_path is None:
            return None
        try:
            with open(metadata_path, 'r') as f:
                run = json.load(f)
        except (OSError, ValueError):
            return None

        report_path = self.run_path(run_id, "report.json")
        run["report"] = None
        if report_path:
            with open(report_path, 'r') as f:
                run["report"] = json.load(f)
        return run

    def list_runs(self, limit: Optional[int] = None) -> List[Dict]:
        """List all runs (most recent first)"""
        index = self._load_index()
        index.sort(key=lambda x: (x["timestamp"], x["id"]), reverse=True)
        if limit:
            index = index[:limit]
        return index

    def search_runs(self, query: str) -> List[Dict]:
        """Runs whose title contains `query` (case-insensitive), most recent first"""
        query = query.lower()
        return [item for item in self.list_runs() if query in item.get("title", "").lower()]

    def get_stats(self) -> Dict:
        """Archive statistics"""
        index = self.list_runs()
        total = len(index)
        if total == 0:
            return {"total_runs": 0}

        stop_reasons = {}
        for item in index:
            reason = item.get("stop_reason") or "Unknown"
            stop_reasons[reason] = stop_reasons.get(reason, 0) + 1

        objectives = [item["final_objective_m"] for item in index
                      if isinstance(item.get("final_objective_m"), (int, float))]
        return {
            "total_runs": total,
            "stop_reason_distribution": stop_reasons,
            "best_objective_m": min(objectives) if objectives else None,
            "latest_timestamp": index[0]["timestamp"],
        }
