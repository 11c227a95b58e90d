"""
Run tracking for experiment pipelines.
Records inputs, outputs and timing of every stage of a run.
"""
import uuid
from contextlib import contextmanager
from datetime import datetime
from typing import Any, Dict, Iterator, List, Optional

from pydantic import BaseModel, Field

from src.riskquant.exceptions import StageError
from src.riskquant.utils.logging import get_logger

logger = get_logger(__name__)


class StageTrace(BaseModel):
    """Trace information for a single stage of a run"""
    stage_name: str
    inputs: Dict[str, Any]
    outputs: Dict[str, Any] = Field(default_factory=dict)
    start_time: datetime
    end_time: Optional[datetime] = None
    duration_ms: Optional[float] = None
    error: Optional[str] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)


class RunTrace(BaseModel):
    """Complete trace of one experiment run"""
    trace_id: str = Field(default_factory=lambda: str(uuid.uuid4()))
    experiment: str
    run_index: int = 0
    seed: int = 0
    start_time: datetime = Field(default_factory=datetime.now)
    end_time: Optional[datetime] = None
    duration_ms: Optional[float] = None
    stages: List[StageTrace] = Field(default_factory=list)
    status: str = "running"
    metadata: Dict[str, Any] = Field(default_factory=dict)

    def add_stage(self, stage_name: str, inputs: Dict[str, Any]) -> StageTrace:
        """Add a new stage to the trace"""
        stage = StageTrace(stage_name=stage_name, inputs=inputs, start_time=datetime.now())
        self.stages.append(stage)
        return stage

    def complete_stage(self, stage: StageTrace, outputs: Dict[str, Any], error: Optional[str] = None):
        """Complete a stage with outputs and timing information"""
        stage.outputs = outputs
        stage.error = error
        stage.end_time = datetime.now()
        stage.duration_ms = (stage.end_time - stage.start_time).total_seconds() * 1000

    def complete_run(self, status: str = "completed"):
        """Complete the run trace"""
        self.end_time = datetime.now()
        self.duration_ms = (self.end_time - self.start_time).total_seconds() * 1000
        self.status = status


class RunTracker:
    """Track run execution with inputs and outputs at each stage"""

    def __init__(self, storage_backends: Optional[List[Any]] = None):
        self.active_traces: Dict[str, RunTrace] = {}
        self.storage_backends = list(storage_backends or [])

    def start_trace(self, experiment: str, run_index: int = 0, seed: int = 0,
                    metadata: Optional[Dict[str, Any]] = None) -> str:
        """Start tracking a new run"""
        trace = RunTrace(experiment=experiment, run_index=run_index, seed=seed, metadata=metadata or {})
        self.active_traces[trace.trace_id] = trace
        return trace.trace_id

    @contextmanager
    def stage(self, trace_id: str, stage_name: str, inputs: Optional[Dict[str, Any]] = None) -> Iterator[Dict[str, Any]]:
        """
        Time a stage; the yielded dict collects its outputs.

        Any exception raised inside is recorded on the trace and re-raised as a
        StageError naming the stage.
        """
        trace = self.active_traces.get(trace_id)
        outputs: Dict[str, Any] = {}
        stage = trace.add_stage(stage_name, inputs or {}) if trace else None
        try:
            yield outputs
        except StageError:
            raise
        except Exception as exc:
            if stage is not None:
                trace.complete_stage(stage, outputs, error=f"{type(exc).__name__}: {exc}")
            logger.error("stage_failed", stage=stage_name, error_type=type(exc).__name__, error=str(exc))
            raise StageError(stage_name, exc) from exc
        if stage is not None:
            trace.complete_stage(stage, outputs)
            logger.debug("stage_complete", stage=stage_name, duration_ms=stage.duration_ms)

    def complete_trace(self, trace_id: str, status: str = "completed") -> Optional[RunTrace]:
        """Complete a run trace and hand it to every storage backend"""
        if trace_id not in self.active_traces:
            return None

        trace = self.active_traces.pop(trace_id)
        trace.complete_run(status)
        for backend in self.storage_backends:
            backend.store_trace(trace)
        return trace

