"""Fast sampler for the two-bank slow-mixing model.

The generic kernels evaluate the two large-scope callback factors in O(N)
per conditional.  Here the bank sums are maintained incrementally so each
conditional costs O(1).  Variables 0..N-1 are the X bank and N..2N-1 the
Y bank; the draw order matches the generic samplers, so on small models
trajectories agree with :func:`asyncgibbs.samplers.run_sequential` and the
two-thread pattern of :func:`asyncgibbs.samplers.run_hogwild_simulated`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError
from .models import BADMIX_M1
from .rng import RngStream, next_below, next_double


@njit(inline="always")
def _energy(sx, sy, N, beta, M1, M2):
    ax = abs(sx)
    coef = beta / N if ax == 1 else M2
    return -M1 * ax + coef * float(sy) * float(sy)


@njit(cache=True)
def _draw(i, x, y, sx, sy, N, beta, M1, M2, u):
    # energies of setting variable i to spin -1 / +1 with everything else fixed
    if i < N:
        rx = sx - (2 * x[i] - 1)
        d = _energy(rx + 1, sy, N, beta, M1, M2) - _energy(rx - 1, sy, N, beta, M1, M2)
    else:
        ry = sy - (2 * y[i - N] - 1)
        d = _energy(sx, ry + 1, N, beta, M1, M2) - _energy(sx, ry - 1, N, beta, M1, M2)
    p0 = 1.0 / (1.0 + np.exp(d))
    return 0 if u < p0 else 1


@njit(cache=True)
def _apply(i, z, x, y, sx, sy, N):
    if i < N:
        sx += 2 * (z - x[i])
        x[i] = z
    else:
        sy += 2 * (z - y[i - N])
        y[i - N] = z
    return sx, sy


@njit(cache=True)
def badmix_trial(N, beta, M1, M2, steps, two_thread, rng, every, out):
    """Run one chain from X = Y = +1; out[k] = (1^T Y > 0) after (k+1)*every writes."""
    x = np.ones(N, dtype=np.int64)
    y = np.ones(N, dtype=np.int64)
    sx = N
    sy = N
    n = 2 * N
    t = 0
    while t < steps:
        i = next_below(rng, n)
        if two_thread and i < N:
            # two X variables from one snapshot; Y variables are always synchronous
            j = i
            while j == i:
                j = next_below(rng, N)
            zi = _draw(i, x, y, sx, sy, N, beta, M1, M2, next_double(rng))
            zj = _draw(j, x, y, sx, sy, N, beta, M1, M2, next_double(rng))
            sx, sy = _apply(i, zi, x, y, sx, sy, N)
            t += 1
            if t % every == 0:
                out[t // every - 1] = sy > 0
            if t < steps:
                sx, sy = _apply(j, zj, x, y, sx, sy, N)
                t += 1
                if t % every == 0:
                    out[t // every - 1] = sy > 0
        else:
            zi = _draw(i, x, y, sx, sy, N, beta, M1, M2, next_double(rng))
            sx, sy = _apply(i, zi, x, y, sx, sy, N)
            t += 1
            if t % every == 0:
                out[t // every - 1] = sy > 0
    return sx, sy


@dataclass
class BadmixSeries:
    steps: np.ndarray           # checkpoint update counts
    fraction_positive: np.ndarray
    trials: int
    mode: str


def run_badmix(N: int, beta: float, steps: int, trials: int, mode: str = "sequential",
               rng: RngStream | None = None, every: int = 1000, M1: float = BADMIX_M1,
               M2: float = 100.0) -> BadmixSeries:
    """Fraction of trials with 1^T Y > 0 at every ``every``-th update.

    Trial k uses ``rng.substream(k)`` in both modes.
    """
    if N < 3 or N % 2 == 0:
        raise ConfigError("N must be an odd integer >= 3")
    if mode not in ("sequential", "two-thread-pattern"):
        raise ConfigError(f"unknown badmix mode {mode!r}")
    if every < 1 or steps < every:
        raise ConfigError("need 1 <= every <= steps")
    rng = rng or RngStream(0)
    k = steps // every
    hits = np.zeros(k, dtype=np.int64)
    out = np.zeros(k, dtype=np.bool_)
    for trial in range(trials):
        out[:] = False
        badmix_trial(N, float(beta), float(M1), float(M2), steps, mode != "sequential",
                     rng.substream(trial).state(), every, out)
        hits += out
    return BadmixSeries(np.arange(1, k + 1) * every, hits / trials, trials, mode)
