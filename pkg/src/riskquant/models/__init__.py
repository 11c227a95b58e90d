"""Data models shared across the package."""
from src.riskquant.models.dataset import Dataset
from src.riskquant.models.metrics import MetricsRecord

__all__ = ["Dataset", "MetricsRecord"]
