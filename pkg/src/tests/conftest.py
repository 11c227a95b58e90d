"""
Shared fixtures for the riskquant test suite.
"""
import numpy as np
import pytest

from src.riskquant.core.nn_core import Network
from src.riskquant.oracles.gaussian_toy import GaussianToySpec, toy_spec_sample


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def small_net(rng):
    """3 inputs, two Softplus layers of width 4, one output."""
    return Network.mlp(3, 1, 2, 4, rng)


@pytest.fixture
def toy_spec() -> GaussianToySpec:
    return toy_spec_sample(3, np.random.default_rng(5))


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Artifact root under tmp_path, also used as the settings default."""
    from src.riskquant.config.settings import settings

    root = tmp_path / "runs"
    monkeypatch.setattr(settings, "OUTPUT_DIR", str(root))
    return root
