"""Counter-based splitmix64 stream.

Value i of the stream for seed s is mix(s + (i + 1) * GOLDEN) with the
standard splitmix64 finalizer, all arithmetic mod 2^64. This is the same
sequence a sequential splitmix64 generator seeded with s produces, so it
can be reproduced in any language.
"""
from __future__ import annotations

import numpy as np

__all__ = ["GOLDEN", "MIX1", "MIX2", "splitmix64", "uniform_open"]

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First ``n`` outputs of splitmix64 seeded with ``seed`` (uint64)."""
    seed = np.uint64(int(seed) % 2**64)
    with np.errstate(over="ignore"):
        z = seed + (np.arange(1, n + 1, dtype=np.uint64) * GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * MIX1
        z = (z ^ (z >> np.uint64(27))) * MIX2
        return z ^ (z >> np.uint64(31))


def uniform_open(seed: int, n: int, low: float = -1.0, high: float = 1.0) -> np.ndarray:
    """Uniform samples in the open interval (low, high).

    Uses the top 53 bits k of each output: u = (k + 1/2) / 2^53 in (0, 1).
    """
    k = (splitmix64(seed, n) >> np.uint64(11)).astype(np.float64)
    u = (k + 0.5) * 2.0**-53
    return low + (high - low) * u
