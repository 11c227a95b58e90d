"""
Run tracking: stage traces and artifact storage.
"""
from src.riskquant.tracking.storage import ArtifactStore, BaseStorageBackend, JSONFileStorage
from src.riskquant.tracking.workflow import RunTrace, RunTracker, StageTrace

__all__ = [
    "ArtifactStore",
    "BaseStorageBackend",
    "JSONFileStorage",
    "RunTrace",
    "RunTracker",
    "StageTrace",
]
