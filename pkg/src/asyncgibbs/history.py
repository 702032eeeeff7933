"""Bounded history of past states for stale reads.

Instead of copying the whole state on every write, the ring stores one
record per write: the overwritten value and the time of the previous write
to the same variable.  Following that back-link chain from a variable's last
write recovers ``x[i, t - d]`` exactly for any ``d <= min(t, capacity - 1)``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .errors import ConfigError


@njit(cache=True)
def history_write(x, last_write, log_old, log_prev, t, i, value):
    """Record the write ``x[i] = value`` at write-time ``t``; returns ``t + 1``."""
    r = t % log_old.shape[0]
    log_old[r] = x[i]
    log_prev[r] = last_write[i]
    last_write[i] = t
    x[i] = value
    return t + 1


@njit(cache=True)
def history_read(x, last_write, log_old, log_prev, t, i, d):
    """Value of variable ``i`` at time ``t - d`` (after ``t - d`` writes)."""
    s = t - d
    w = last_write[i]
    v = x[i]
    R = log_old.shape[0]
    while w >= s:
        r = w % R
        v = log_old[r]
        w = log_prev[r]
    return v


class StateHistory:
    """Current state plus enough history to answer reads up to ``max_delay`` old."""

    def __init__(self, initial, max_delay: int):
        if max_delay < 0:
            raise ConfigError("max_delay must be >= 0")
        self.x = np.array(initial, dtype=np.int64)
        self.max_delay = int(max_delay)
        self.last_write = np.full(self.x.shape[0], -1, dtype=np.int64)
        self.log_old = np.zeros(self.max_delay + 1, dtype=np.int64)
        self.log_prev = np.full(self.max_delay + 1, -1, dtype=np.int64)
        self.t = 0

    def write(self, i: int, value: int) -> None:
        self.t = history_write(self.x, self.last_write, self.log_old, self.log_prev, self.t, i, value)

    def read(self, i: int, d: int) -> int:
        if d < 0 or d > min(self.t, self.max_delay):
            raise ConfigError(f"delay {d} outside [0, min(t={self.t}, {self.max_delay})]")
        return int(history_read(self.x, self.last_write, self.log_old, self.log_prev, self.t, i, d))

    def snapshot(self, d: int) -> np.ndarray:
        return np.array([self.read(i, d) for i in range(self.x.shape[0])])
