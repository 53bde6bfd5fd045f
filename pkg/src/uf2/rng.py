"""SplitMix64 generator used for synthetic clips.

Constants of the reference SplitMix64 generator:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z = z ^ (z >> 31)

A uniform double in [0, 1) is ``(z >> 11) * 2**-53``. All arithmetic is
modulo 2**64, so the stream is identical on every platform.
"""

from __future__ import annotations

import numpy as np

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def splitmix64(seed: int, n: int) -> np.ndarray:
    """Return the first ``n`` outputs of SplitMix64 seeded with ``seed`` as uint64."""
    seed &= _MASK
    with np.errstate(over="ignore"):
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(seed) + steps * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
        z = z ^ (z >> np.uint64(31))
    return z


def uniform(seed: int, shape, low: float = -1.0, high: float = 1.0) -> np.ndarray:
    """Seeded float64 samples in [low, high), filled in C order."""
    shape = tuple(int(s) for s in shape)
    n = int(np.prod(shape)) if shape else 1
    u = (splitmix64(seed, n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return (low + (high - low) * u).reshape(shape)
