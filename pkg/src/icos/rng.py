"""SplitMix64: the seedable generator behind every random instance.

The generator is fully specified here so that other implementations can
reproduce instances bit for bit.  State is a single unsigned 64-bit word.
Each step computes (all arithmetic mod 2^64)::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

Derived draws:

* ``uniform()`` = ``(next_u64() >> 11) * 2^-53``, in [0, 1).
* ``normal()`` uses Box-Muller on two consecutive uniforms ``u1, u2``:
  ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``.  The sine branch is discarded,
  so every normal consumes exactly two words.
* Array draws fill in C (row-major) order.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int = 0):
        if seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def _uniform1(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def _normal1(self) -> float:
        u1 = self._uniform1()
        u2 = self._uniform1()
        return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)

    def _fill(self, draw, size, scale=1.0, shift=0.0):
        if size is None:
            return shift + scale * draw()
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape)) if shape else 1
        out = np.fromiter((draw() for _ in range(count)), float, count)
        return (shift + scale * out).reshape(shape)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._fill(self._uniform1, size, high - low, low)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None):
        return self._fill(self._normal1, size, scale, loc)

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in ``[low, high)`` by rejection (no modulo bias)."""
        span = high - low
        if span <= 0:
            raise ValueError("empty range")
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            v = self.next_u64()
            if v < limit:
                return low + v % span

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``range(n)``."""
        p = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.integers(0, i + 1)
            p[i], p[j] = p[j], p[i]
        return np.array(p, dtype=np.int64)
