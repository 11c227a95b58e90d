"""
Seed derivation for reproducible experiments.

A run seed is expanded into independent named streams so that changing, say,
the number of training epochs never changes the simulated data.
"""
from typing import Dict

import numpy as np

_MASK64 = (1 << 64) - 1

STREAM_NAMES = ("init", "shuffle", "data", "alpha", "eval")


def splitmix64(x: int) -> int:
    """One splitmix64 output for the 64-bit state ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_run_seed(master_seed: int, run_index: int) -> int:
    """Seed of run ``run_index``: splitmix64(master XOR run_index)."""
    return splitmix64((master_seed ^ run_index) & _MASK64)


def counter_rng(seed: int, index: int) -> np.random.Generator:
    """Generator keyed by (seed, index); rows or paths can be regenerated individually."""
    return np.random.Generator(np.random.Philox(key=np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)))


class SeedStreams:
    """Named, independent random streams derived from one seed."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        children = np.random.SeedSequence(self.seed).spawn(len(STREAM_NAMES))
        self._sequences: Dict[str, np.random.SeedSequence] = dict(zip(STREAM_NAMES, children))

    def rng(self, name: str) -> np.random.Generator:
        """Fresh generator for the named stream (same name -> same draws)."""
        if name not in self._sequences:
            raise KeyError(f"Unknown stream '{name}', expected one of {STREAM_NAMES}")
        return np.random.default_rng(self._sequences[name])

    def child_seed(self, name: str) -> int:
        """A 64-bit integer seed for the named stream."""
        return int(self._sequences[name].generate_state(1, dtype=np.uint64)[0])

    def __repr__(self) -> str:
        return f"SeedStreams(seed={self.seed})"
