"""
Fixtures for end-to-end experiment runs on deliberately tiny configs.
"""
import copy
import json
from typing import Any, Dict

import pytest

from src.riskquant.config.experiment import ExperimentConfig, parse_config

TINY: Dict[str, Any] = {
    "seed": 7,
    "runs": 1,
    "dims": [2],
    "sizes": [512],
    "n_eval": 512,
    "n_twin": 512,
    "alphas": [0.95],
    "arch": {"hidden_layers": 1, "width": 4},
    "train": {"epochs": 2, "batch_size": 256, "learning_rate": 0.01},
}

TINY_DIM: Dict[str, Any] = {
    "market": {"n_swaps": 3, "max_maturity": 2, "horizon_years": 2.0, "steps": 8},
    "dim": {"n_paths": 64, "n_outer": 4},
    "nested": {"n_inner": 64, "K": 4},
}


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


@pytest.fixture
def tiny_config():
    """Factory for a tiny validated config of the given experiment kind."""

    def make(experiment: str, **overrides) -> ExperimentConfig:
        base = _merge(TINY, TINY_DIM) if experiment == "dim" else TINY
        return parse_config(_merge(base, {"experiment": experiment, **overrides}))

    return make


@pytest.fixture
def tiny_config_file(tmp_path):
    """Factory writing a tiny config as JSON and returning its path."""

    def make(experiment: str, name: str = "config.json", **overrides) -> str:
        base = _merge(TINY, TINY_DIM) if experiment == "dim" else TINY
        data = _merge(base, {"experiment": experiment, "output_dir": str(tmp_path / experiment), **overrides})
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return str(path)

    return make
