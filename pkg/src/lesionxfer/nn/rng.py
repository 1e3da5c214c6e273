"""Counter-based SplitMix64 random stream.

The i-th output (i = 0, 1, ...) of a stream with seed ``s`` is
``mix64(s + (i + 1) * GOLDEN)`` computed modulo 2**64, where ``mix64`` is the
SplitMix64 finalizer below. Uniform floats take the top 53 bits.  Because
every value depends only on (seed, index) the stream is identical on every
platform and can be generated in vectorized chunks.
"""

from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * MIX_B) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_A)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_B)
    return z ^ (z >> np.uint64(31))


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    return int(k) & MASK64


class Rng:
    """Seeded SplitMix64 stream with a position counter."""

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & MASK64
        self.counter = counter

    def __repr__(self):
        return f"Rng(seed={self.seed:#x}, counter={self.counter})"

    def fork(self, *keys) -> "Rng":
        """Independent child stream keyed by ints or strings.

        The child seed depends only on this stream's seed and the keys, never on
        how many values have already been drawn.
        """
        s = self.seed
        for k in keys:
            s = mix64(s ^ mix64((_key(k) + GOLDEN) & MASK64))
        return Rng(s)

    def next_u64(self, n: int | None = None):
        if n is None:
            self.counter += 1
            return mix64(self.seed + self.counter * GOLDEN)
        idx = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        self.counter += n
        z = np.uint64(self.seed) + idx * np.uint64(GOLDEN)
        return _mix64_array(z)

    def uniform(self, shape=None) -> np.ndarray | float:
        """Floats in [0, 1) with 53 random bits."""
        if shape is None:
            return (self.next_u64() >> 11) * 2.0**-53
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return u.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates: for i = n-1 .. 1 swap i with floor(u * (i + 1))."""
        perm = np.arange(n)
        if n < 2:
            return perm
        u = self.uniform(n - 1)
        for step, i in enumerate(range(n - 1, 0, -1)):
            j = int(u[step] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def shuffle(self, items: list) -> list:
        return [items[i] for i in self.permutation(len(items))]
