"""
Storage backends for run tracking and the per-run artifact directory.
"""
import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import pandas as pd

from src.riskquant.tracking.workflow import RunTrace
from src.riskquant.utils.logging import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]


class BaseStorageBackend:
    """Base class for run trace storage backends"""

    def store_trace(self, trace: RunTrace) -> None:
        """Store a completed run trace"""
        raise NotImplementedError()


class JSONFileStorage(BaseStorageBackend):
    """Store run traces as JSON files"""

    def __init__(self, directory: PathLike = "traces"):
        """Initialize JSON file storage with the specified directory"""
        self.directory = str(directory)
        os.makedirs(self.directory, exist_ok=True)

    def _filename(self, trace_id: str) -> str:
        return os.path.join(self.directory, f"{trace_id}.json")

    def store_trace(self, trace: RunTrace) -> None:
        """Store a trace as a JSON file"""
        with open(self._filename(trace.trace_id), "w") as f:
            json.dump(trace.model_dump(mode="json"), f, indent=2, default=str)


class ArtifactStore:
    """
    Writes the files of one artifact directory.

    Layout:
        config.resolved.json    effective config with defaults filled
        metrics.jsonl           one sorted-key JSON object per (run, method, alpha)
        timings.csv             wall times, kept apart from metrics.jsonl
        summary.csv             method x alpha mean/std table
        models/<name>.json      fitted models
        plotdata/<name>.csv     figure data
        traces/<id>.json        run traces (wall-clock, not reproducible)
    """

    METRICS_FILE = "metrics.jsonl"
    TIMINGS_FILE = "timings.csv"
    SUMMARY_FILE = "summary.csv"
    CONFIG_FILE = "config.resolved.json"

    def __init__(self, root: PathLike):
        self.root = Path(root)
        for sub in ("models", "plotdata", "traces"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self.traces = JSONFileStorage(self.root / "traces")

    @property
    def metrics_path(self) -> Path:
        return self.root / self.METRICS_FILE

    @property
    def summary_path(self) -> Path:
        return self.root / self.SUMMARY_FILE

    @property
    def config_path(self) -> Path:
        return self.root / self.CONFIG_FILE

    def reset(self) -> None:
        """Remove outputs of a previous run in the same directory."""
        for name in (self.METRICS_FILE, self.TIMINGS_FILE, self.SUMMARY_FILE):
            path = self.root / name
            if path.exists():
                path.unlink()

    def write_config(self, resolved: Dict[str, Any]) -> Path:
        with open(self.config_path, "w") as f:
            json.dump(resolved, f, indent=2, sort_keys=True)
            f.write("\n")
        return self.config_path

    def append_metrics(self, rows: Iterable[Dict[str, Any]]) -> int:
        """Append rows to metrics.jsonl; returns the number written."""
        count = 0
        with open(self.metrics_path, "a") as f:
            for row in rows:
                f.write(json.dumps(row, sort_keys=True) + "\n")
                count += 1
        return count

    def read_metrics(self) -> List[Dict[str, Any]]:
        if not self.metrics_path.exists():
            return []
        with open(self.metrics_path) as f:
            return [json.loads(line) for line in f if line.strip()]

    def append_timings(self, rows: List[Dict[str, Any]]) -> None:
        if not rows:
            return
        path = self.root / self.TIMINGS_FILE
        pd.DataFrame(rows).to_csv(path, mode="a", header=not path.exists(), index=False)

    def write_model(self, name: str, model) -> Path:
        """Write a model exposing ``to_json()`` to models/<name>.json."""
        path = self.root / "models" / f"{name}.json"
        path.write_text(model.to_json())
        return path

    def write_summary(self, frame: pd.DataFrame) -> Path:
        frame.to_csv(self.summary_path, index=False)
        return self.summary_path

    def write_plotdata(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.root / "plotdata" / f"{name}.csv"
        frame.to_csv(path, index=False)
        logger.debug("plotdata_written", name=name, rows=len(frame))
        return path
