"""Deterministic counter-based random number generator (SplitMix64).

Every stochastic step in this package (data generation, label corruption,
weight init, epoch shuffles) draws from this generator rather than the
platform RNG, so results are reproducible byte-for-byte across runs,
platforms, and numpy versions.

SplitMix64 is a counter-based generator: output i is a fixed 64-bit mixing
function applied to ``seed + (i+1) * GOLDEN_GAMMA`` (all arithmetic mod
2^64).  That makes whole blocks of outputs computable as vectorized numpy
uint64 expressions with no sequential state.
"""

from __future__ import annotations

import numpy as np

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)

_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# 2^-53, converts the top 53 bits of a uint64 into a float in [0, 1)
_INV_2_53 = 1.0 / 9007199254740992.0


_MASK64 = 0xFFFFFFFFFFFFFFFF


def _mix64(z: np.ndarray) -> np.ndarray:
    # vectorized over uint64 arrays; integer wraparound is the point
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _mix64_int(z: int) -> int:
    # same finalizer on plain ints (numpy warns on scalar uint64 overflow)
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *tags: int | str) -> int:
    """Derive an independent substream seed from ``seed`` and a tag path.

    String tags are folded in with FNV-1a so call sites can label streams
    ("corrupt", "init", ...) without coordinating integer namespaces.
    """
    z = seed & _MASK64
    for tag in tags:
        if isinstance(tag, str):
            h = 0xCBF29CE484222325
            for byte in tag.encode("utf-8"):
                h = ((h ^ byte) * 0x100000001B3) & _MASK64
            t = h
        else:
            t = tag & _MASK64
        z = _mix64_int(((z + int(GOLDEN_GAMMA)) & _MASK64) ^ t)
    return _mix64_int((z + int(GOLDEN_GAMMA)) & _MASK64)


class Rng:
    """SplitMix64 stream addressed by an advancing 64-bit counter."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self._counter = 0

    def next_uint64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs as a uint64 array."""
        if n < 0:
            raise ValueError(f"n must be >= 0, got {n}")
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        return _mix64(self._seed + idx * GOLDEN_GAMMA)

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` floats uniform in [0, 1), 53-bit resolution."""
        return (self.next_uint64(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def normals(self, n: int) -> np.ndarray:
        """``n`` standard normals via Box-Muller on paired uniforms."""
        m = (n + 1) // 2
        # 1 - u keeps the log argument in (0, 1]
        u1 = 1.0 - self.uniforms(m)
        u2 = self.uniforms(m)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * m, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def shuffle(self, x: np.ndarray) -> None:
        """In-place Fisher-Yates shuffle."""
        n = len(x)
        if n < 2:
            return
        u = self.uniforms(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(u[n - 1 - i] * (i + 1))
            x[i], x[j] = x[j], x[i]

    def permutation(self, n: int) -> np.ndarray:
        out = np.arange(n, dtype=np.int64)
        self.shuffle(out)
        return out

    def categorical(self, cdf: np.ndarray, n: int) -> np.ndarray:
        """``n`` draws from the distribution with cumulative weights ``cdf``."""
        u = self.uniforms(n)
        return np.searchsorted(cdf, u, side="right").astype(np.int64)
