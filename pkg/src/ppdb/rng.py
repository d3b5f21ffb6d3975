"""Counter-based random streams.

A stream is identified by a 64-bit key derived from ``(seed, index, relation
ordinal)``; draw ``j`` of the stream is ``mix64(key + (j + 1) * GAMMA)``,
i.e. the ``j``-th output of SplitMix64 seeded with ``key``.  Nothing is
carried between streams, so any draw can be recomputed in isolation and
sampling order does not matter.

Uniform doubles use the top 53 bits: ``(x >> 11) * 2**-53`` in ``[0, 1)``.
Bounded integers use modulo with rejection of the biased tail.
"""

from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TWO_M53 = 2.0**-53


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def stream_key(*parts: int) -> int:
    """Fold integers (reduced mod 2**64) into one stream key."""
    k = 0
    for x in parts:
        k = mix64(((k ^ (x & MASK)) + GAMMA) & MASK)
    return k


class Stream:
    """Sequential reader over one counter-based stream."""

    __slots__ = ("key", "counter")

    def __init__(self, key: int):
        self.key = key & MASK
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64(self.key + self.counter * GAMMA)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * _TWO_M53

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("bound must be positive")
        limit = ((1 << 64) // n) * n
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def first_draws(seed: int, start: int, count: int, ordinal: int = 0) -> np.ndarray:
    """Draw 0 of the streams ``stream_key(seed, i, ordinal)`` for ``i`` in ``[start, start+count)``.

    Vectorized twin of ``Stream(stream_key(seed, i, ordinal)).next_u64()``.
    """
    seed &= MASK
    g = np.uint64(GAMMA)
    k0 = mix64((seed + GAMMA) & MASK)  # after folding in the seed
    idx = (np.arange(count, dtype=np.uint64) + np.uint64(start & MASK))
    with np.errstate(over="ignore"):
        k = mix64_array((np.uint64(k0) ^ idx) + g)
        k = mix64_array((k ^ np.uint64(ordinal & MASK)) + g)
        return mix64_array(k + g)
