"""Seeded random number generation shared by every stochastic step.

The generator is SplitMix64 (Steele, Lea & Flood 2014) evaluated in counter
form: the i-th output (i >= 1) is ``mix(seed + i * 0x9E3779B97F4A7C15)`` with
all arithmetic modulo 2**64.  That is bit-for-bit the sequential SplitMix64
stream, but it can be evaluated for a whole block of counters at once with
numpy's wrapping uint64 arithmetic, and it produces identical draws on every
platform.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """Counter-based SplitMix64 stream.

    ``derive`` hashes the seed with integer keys to produce independent child
    streams; it does not consume draws, so a child depends only on the parent
    seed and the keys.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & MASK64
        self.counter = 0

    def __repr__(self):
        return f"Rng(seed={self.seed}, counter={self.counter})"

    def next_uint64(self, size: int) -> np.ndarray:
        if size < 0:
            raise ValueError("size must be non-negative")
        idx = np.arange(self.counter + 1, self.counter + 1 + size, dtype=np.uint64)
        self.counter += size
        state = np.uint64(self.seed) + idx * np.uint64(GOLDEN)
        return _mix64_array(state)

    def uniform(self, size) -> np.ndarray:
        """Doubles in [0, 1) built from the top 53 bits of each draw."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        bits = self.next_uint64(n) >> np.uint64(11)
        return (bits.astype(np.float64) * 2.0**-53).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        # stable argsort of random keys: uniform over permutations, ties broken by position
        keys = self.next_uint64(n)
        return np.argsort(keys, kind="stable")

    def shuffled(self, values) -> np.ndarray:
        values = np.asarray(values)
        return values[self.permutation(len(values))]

    def derive(self, *keys: int) -> "Rng":
        h = mix64(self.seed ^ 0x5851F42D4C957F2D)
        for key in keys:
            h = mix64(h ^ mix64((int(key) + GOLDEN) & MASK64))
        return Rng(h)
