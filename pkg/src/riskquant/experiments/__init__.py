"""
Seeded batch experiments and their artifact output.
"""
from src.riskquant.experiments.runner import ExperimentResult, RunOutput, run_experiment, summarize

__all__ = ["ExperimentResult", "RunOutput", "run_experiment", "summarize"]
