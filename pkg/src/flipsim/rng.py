"""Counter-based random numbers for order-independent, reproducible seeding.

Every draw is a pure function of (seed, stream, lane), so particle jitter
for a given cell/subcell is identical no matter how many other cells are
seeded or in what order. The generator is the splitmix64 finalizer applied
to a golden-ratio Weyl sequence.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1


def uniform01(seed: int, stream, lane) -> np.ndarray:
    """Uniform draws in [0, 1), one per (stream, lane) pair.

    `stream` and `lane` may be scalars or broadcastable integer arrays;
    lane must stay below 2**20 so the combined counter is injective.
    """
    s = np.asarray(stream, dtype=np.uint64)
    l = np.asarray(lane, dtype=np.uint64)
    with np.errstate(over="ignore"):
        counter = s * np.uint64(1 << 20) + l
        z = np.uint64(seed & _MASK64) + (counter + np.uint64(1)) * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def derive_seed(base: int, stream: int) -> int:
    """Deterministically fork a new 64-bit seed from (base, stream)."""
    z = (base + (stream + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)
