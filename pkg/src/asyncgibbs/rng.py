"""Counter-mode seeded xoshiro256** streams usable from numba kernels.

An :class:`RngStream` is identified by ``(seed, stream)`` plus an optional
tuple of sub-keys.  ``state()`` hands out a fresh 4-word xoshiro state that
the jitted helpers below advance in place.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, uint64

_INV_2_53 = 1.0 / 9007199254740992.0


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream: int = 0
    subkey: tuple[int, ...] = field(default=())

    def state(self) -> np.ndarray:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *self.subkey))
        st = ss.generate_state(4, dtype=np.uint64)
        if not st.any():  # all-zero state is a fixed point of xoshiro
            st[0] = np.uint64(0x9E3779B97F4A7C15)
        return st

    def substream(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.stream, self.subkey + tuple(key))

    def describe(self) -> dict:
        return {"seed": self.seed, "stream": self.stream, "subkey": list(self.subkey)}


@njit(inline="always")
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * uint64(5), 7) * uint64(9)
    t = s[1] << uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def next_double(s):
    """Uniform on [0, 1) with 53 random bits."""
    return float(next_u64(s) >> uint64(11)) * _INV_2_53


@njit(cache=True)
def next_below(s, n):
    """Uniform integer in [0, n)."""
    k = int(next_double(s) * n)
    if k >= n:
        k = n - 1
    return k


@njit(cache=True)
def sample_cdf(s, cdf):
    """Inverse-CDF draw; a single-atom distribution consumes no randomness."""
    m = cdf.shape[0]
    if m == 1:
        return 0
    u = next_double(s)
    k = np.searchsorted(cdf, u, side="right")
    if k >= m:
        k = m - 1
    return k
