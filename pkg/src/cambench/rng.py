"""Deterministic randomness: splitmix64-seeded xoshiro256** streams.

Every sample (and every distortion application) gets its own stream derived
from (seed, tag, index...), so work items can run on any number of workers
while staying bit-reproducible.
"""
from __future__ import annotations

import math

import numpy as np

_M64 = (1 << 64) - 1

# Stream-derivation tags. Distinct constants keep purposes statistically
# independent even when they share a run seed.
TAG_SAMPLE = 0x53414D50
TAG_DISTORT = 0x44495354
TAG_SPLIT = 0x53504C54
TAG_BACKGROUND = 0x42414348
TAG_OCCLUDE = 0x4F43434C


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step; returns (advanced state, 64-bit output)."""
    state = (state + 0x9E3779B97F4A7C15) & _M64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return state, (z ^ (z >> 31)) & _M64


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _M64


class Stream:
    """xoshiro256** generator with the draw helpers synthesis needs.

    The four state words are filled from a splitmix64 chain seeded by
    folding `keys` into `seed`, the seeding procedure recommended by the
    xoshiro authors.
    """

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int, *keys: int):
        x = seed & _M64
        for k in keys:
            x, out = splitmix64(x ^ (k & _M64))
            x = out
        words = []
        for _ in range(4):
            x, out = splitmix64(x)
            words.append(out)
        if not any(words):
            words[0] = 1  # xoshiro must not start all-zero
        self._s0, self._s1, self._s2, self._s3 = words

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        result = (_rotl((s1 * 5) & _M64, 7) * 9) & _M64
        t = (s1 << 17) & _M64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform float in [lo, hi) with 53-bit resolution."""
        u = (self.next_u64() >> 11) * 2.0**-53
        return lo + (hi - lo) * u

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive (modulo draw; the tiny
        modulo bias is irrelevant here, determinism is the contract)."""
        if hi < lo:
            raise ValueError(f"empty integer range [{lo}, {hi}]")
        return lo + self.next_u64() % (hi - lo + 1)

    def choice(self, seq):
        return seq[self.randint(0, len(seq) - 1)]

    def sign(self) -> int:
        return 1 if self.next_u64() & 1 else -1

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """One Box-Muller draw (consumes two uniforms, no caching)."""
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53  # (0, 1]
        u2 = (self.next_u64() >> 11) * 2.0**-53
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, n: int, sigma: float = 1.0) -> np.ndarray:
        """n Gaussian draws, Box-Muller vectorized over a u64 block."""
        m = (n + 1) // 2
        raw = np.array([self.next_u64() for _ in range(2 * m)], dtype=np.uint64)
        u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
        u1 = u[:m] + 2.0**-53  # keep strictly positive for the log
        u2 = u[m:]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return sigma * out

    def sample_indices(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n) via partial Fisher-Yates."""
        if k > n:
            raise ValueError(f"cannot sample {k} from {n}")
        idx = np.arange(n, dtype=np.int64)
        for i in range(k):
            j = self.randint(i, n - 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k].copy()


def derive_seed(seed: int, *keys: int) -> int:
    """Collapse (seed, keys...) into a single u64, for provenance records."""
    x = seed & _M64
    for k in keys:
        x, out = splitmix64(x ^ (k & _M64))
        x = out
    return x
