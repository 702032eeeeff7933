"""Coupling-based mixing-time estimation for ferromagnetic Ising models.

Two chains start from the all-up and all-down states and share every
random choice: the variable picked, the uniform threshold and the read
delays.  With ferromagnetic couplings the update ``1 iff u < p`` keeps the
down chain below the up chain, so the chains meet when every site agrees.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit
from scipy import stats

from .delays import DelayModel
from .distances import tv_distance
from .errors import ConfigError, DimensionMismatch, InsufficientTrials, NonFerromagnetic
from .graph import FactorGraph
from .history import history_read, history_write
from .rng import RngStream, next_below, next_double, sample_cdf
from .samplers import delay_stream

DEFAULT_CAP = 10**8
MIN_TRIALS = 100


# -- maximal coupling -------------------------------------------------------

def _generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return np.random.default_rng(np.random.SeedSequence(rng.seed, spawn_key=(rng.stream, *rng.subkey)))
    return np.random.default_rng(rng)


def maximal_coupling_sample(p, q, rng=None, size: int | None = None):
    """Draw (a, b) with a ~ p, b ~ q and P(a != b) = TV(p, q).

    With probability 1 - TV both come from the normalized overlap min(p, q);
    otherwise each comes from its own normalized residual.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionMismatch("p and q must be vectors of equal length")
    p, q = p / p.sum(), q / q.sum()
    gen = _generator(rng)
    m = len(p)
    overlap = np.minimum(p, q)
    tv = tv_distance(p, q)
    k = 1 if size is None else int(size)
    same = gen.random(k) >= tv
    a = np.empty(k, dtype=np.int64)
    b = np.empty(k, dtype=np.int64)
    ns = int(same.sum())
    if ns:
        c = gen.choice(m, size=ns, p=overlap / overlap.sum())
        a[same] = c
        b[same] = c
    nd = k - ns
    if nd:
        a[~same] = gen.choice(m, size=nd, p=(p - overlap) / tv)
        b[~same] = gen.choice(m, size=nd, p=(q - overlap) / tv)
    if size is None:
        return int(a[0]), int(b[0])
    return a, b


# -- Ising extraction -------------------------------------------------------

class IsingParams(NamedTuple):
    nbr_ptr: np.ndarray
    nbr: np.ndarray
    J: np.ndarray      # coupling per adjacency entry
    h: np.ndarray      # external field per variable

    @property
    def n(self) -> int:
        return len(self.h)

    def influence_bound(self) -> float:
        """max_i sum_j tanh|J_ij|; equals degree * tanh(beta) for uniform couplings."""
        t = np.tanh(np.abs(self.J))
        return float(max((t[self.nbr_ptr[i]:self.nbr_ptr[i + 1]].sum() for i in range(self.n)), default=0.0))


def ising_params(graph: FactorGraph) -> IsingParams:
    """Read a binary pairwise table graph as sum_ij J_ij s_i s_j + sum_i h_i s_i (s = +-1)."""
    n = graph.n
    if np.any(graph.domain_sizes != 2):
        raise NonFerromagnetic("coupling requires binary variables")
    h = np.zeros(n)
    J: dict[tuple[int, int], float] = {}
    for f in graph.factors:
        if not f.is_table or len(f.scope) > 2:
            raise NonFerromagnetic("coupling requires unary/pairwise table factors")
        T = f.table
        if len(f.scope) == 1:
            h[f.scope[0]] += (T[1] - T[0]) / 2
        elif len(f.scope) == 2:
            a, b = f.scope
            h[a] += (T[1, 0] + T[1, 1] - T[0, 0] - T[0, 1]) / 4
            h[b] += (T[0, 1] + T[1, 1] - T[0, 0] - T[1, 0]) / 4
            key = (min(a, b), max(a, b))
            J[key] = J.get(key, 0.0) + (T[0, 0] + T[1, 1] - T[0, 1] - T[1, 0]) / 4
    if any(v < 0 for v in J.values()):
        raise NonFerromagnetic("negative coupling found; monotone coupling is invalid")
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for (a, b), v in J.items():
        if v != 0.0:
            adj[a].append((b, v))
            adj[b].append((a, v))
    ptr = np.zeros(n + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(r) for r in adj])
    nbr = np.array([j for r in adj for j, _ in sorted(r)], dtype=np.int64)
    Jv = np.array([v for r in adj for _, v in sorted(r)], dtype=np.float64)
    return IsingParams(ptr, nbr, Jv, h)


# -- kernel -----------------------------------------------------------------

@njit(nogil=True, cache=True)
def coupling_trial(nbr_ptr, nbr, J, h, cdf, hold, rng, drng, cap, extra):
    """Returns (T_c, censored, held_after, monotone).

    T_c is the write count at which the chains became equal for good: they
    must then agree for ``hold`` further writes so that no stale read can
    separate them again.
    """
    n = h.shape[0]
    R = cdf.shape[0]
    x = np.ones(n, dtype=np.int64)
    y = np.zeros(n, dtype=np.int64)
    lw_x = np.full(n, -1, dtype=np.int64)
    lo_x = np.zeros(R, dtype=np.int64)
    lp_x = np.full(R, -1, dtype=np.int64)
    lw_y = np.full(n, -1, dtype=np.int64)
    lo_y = np.zeros(R, dtype=np.int64)
    lp_y = np.full(R, -1, dtype=np.int64)
    disagree = n
    since = -1
    t = 0
    coupled = -1
    limit = cap
    held = 1
    while t < limit:
        i = next_below(rng, n)
        u = next_double(rng)
        fx = h[i]
        fy = h[i]
        for p in range(nbr_ptr[i], nbr_ptr[i + 1]):
            j = nbr[p]
            d = sample_cdf(drng, cdf)
            if d > t:
                d = t
            fx += J[p] * (2 * history_read(x, lw_x, lo_x, lp_x, t, j, d) - 1)
            fy += J[p] * (2 * history_read(y, lw_y, lo_y, lp_y, t, j, d) - 1)
        zx = 1 if u < 1.0 / (1.0 + np.exp(-2.0 * fx)) else 0
        zy = 1 if u < 1.0 / (1.0 + np.exp(-2.0 * fy)) else 0
        if zy > zx:
            return t, 0, 0, 0
        before = 1 if x[i] != y[i] else 0
        after = 1 if zx != zy else 0
        history_write(x, lw_x, lo_x, lp_x, t, i, zx)
        t = history_write(y, lw_y, lo_y, lp_y, t, i, zy)
        disagree += after - before
        if coupled >= 0:
            if disagree != 0:
                held = 0
            continue
        if disagree == 0:
            if since < 0:
                since = t
            if t - since >= hold:
                coupled = since
                limit = t + extra
        else:
            since = -1
    if coupled < 0:
        return cap, 1, 0, 1
    return coupled, 0, held, 1


@njit(nogil=True, cache=True)
def coupling_batch(nbr_ptr, nbr, J, h, cdf, hold, states, dstates, cap, extra, out):
    for k in range(states.shape[0]):
        r = coupling_trial(nbr_ptr, nbr, J, h, cdf, hold, states[k], dstates[k], cap, extra)
        out[k, 0] = r[0]
        out[k, 1] = r[1]
        out[k, 2] = r[2]
        out[k, 3] = r[3]


# -- public API -------------------------------------------------------------

@dataclass
class CouplingRun:
    coupling_time: int
    trial: int
    delay_model: dict
    seed: dict
    censored: bool = False
    held_after: bool | None = None    # stayed equal for the requested extra steps


def _trial_stream(rng: RngStream, k: int) -> RngStream:
    return rng.substream(k)


def run_coupling_trials(graph: FactorGraph, delay_model: DelayModel | None, trials: int,
                        rng: RngStream | None = None, cap: int = DEFAULT_CAP,
                        continue_steps: int = 0, params: IsingParams | None = None) -> list[CouplingRun]:
    """Independent trials; trial k uses ``rng.substream(k)`` so results are reproducible
    and common random numbers are shared across delay models."""
    rng = rng or RngStream(0)
    params = params or ising_params(graph)
    delay_model = delay_model or DelayModel.zero(graph.n)
    if delay_model.is_pattern:
        raise ConfigError("coupling supports i.i.d. delay models only")
    streams = [_trial_stream(rng, k) for k in range(trials)]
    states = np.array([s.state() for s in streams]).reshape(trials, 4)
    dstates = np.array([delay_stream(s).state() for s in streams]).reshape(trials, 4)
    out = np.zeros((trials, 4), dtype=np.int64)
    cdf = np.ascontiguousarray(delay_model.cdf[:delay_model.effective_max + 1])
    cdf[-1] = 1.0
    coupling_batch(params.nbr_ptr, params.nbr, params.J, params.h, cdf,
                   int(delay_model.effective_max), states, dstates, int(cap), int(continue_steps), out)
    if not out[:, 3].all():
        raise AssertionError("monotone coupling order violated")
    desc = delay_model.describe()
    return [CouplingRun(int(o[0]), k, desc, streams[k].describe(), bool(o[1]),
                        (bool(o[2]) if continue_steps and not o[1] else None))
            for k, o in enumerate(out)]


def run_monotone_coupling_ising(graph: FactorGraph, delay_model: DelayModel | None = None,
                                rng: RngStream | None = None, cap: int = DEFAULT_CAP,
                                continue_steps: int = 0) -> CouplingRun:
    """One coupling trial driven by ``rng`` (delays from its delay substream)."""
    rng = rng or RngStream(0)
    params = ising_params(graph)
    delay_model = delay_model or DelayModel.zero(graph.n)
    cdf = np.ascontiguousarray(delay_model.cdf[:delay_model.effective_max + 1])
    cdf[-1] = 1.0
    r = coupling_trial(params.nbr_ptr, params.nbr, params.J, params.h, cdf,
                       int(delay_model.effective_max), rng.state(), delay_stream(rng).state(),
                       int(cap), int(continue_steps))
    if not r[3]:
        raise AssertionError("monotone coupling order violated")
    return CouplingRun(int(r[0]), 0, delay_model.describe(), rng.describe(), bool(r[1]),
                       bool(r[2]) if continue_steps and not r[1] else None)


@dataclass
class MixingEstimate:
    epsilon: float
    t_hat: int
    trials: int
    band: tuple[int, int]
    censored_count: int = 0
    censored_estimate: bool = False
    extra: dict = field(default_factory=dict)


def quantile_index(m: int, epsilon: float) -> int:
    """1-based order statistic k such that at most epsilon*m runs exceed T_(k)."""
    return max(1, m - int(np.floor(epsilon * m + 1e-9)))


def estimate_mixing_time(runs, epsilon: float = 0.25, confidence: float = 0.95) -> MixingEstimate:
    """Empirical coupling-time quantile: the smallest t with #(T_c > t) <= epsilon * m.

    The band comes from binomial order statistics for the (1 - epsilon)
    quantile at the requested confidence.
    """
    times = np.sort(np.array([r.coupling_time if isinstance(r, CouplingRun) else int(r) for r in runs],
                             dtype=np.int64))
    m = len(times)
    if m < MIN_TRIALS:
        raise InsufficientTrials(f"{m} runs < {MIN_TRIALS}")
    if not 0 < epsilon < 1:
        raise ConfigError("epsilon must lie in (0, 1)")
    k = quantile_index(m, epsilon)
    a = (1 - confidence) / 2
    lo = int(stats.binom.ppf(a, m, 1 - epsilon))
    hi = int(stats.binom.ppf(1 - a, m, 1 - epsilon)) + 1
    lo, hi = min(max(lo, 1), m), min(max(hi, 1), m)
    censored = sum(1 for r in runs if isinstance(r, CouplingRun) and r.censored)
    cap_hit = censored > 0 and times[k - 1] == times[-1] and any(
        isinstance(r, CouplingRun) and r.censored and r.coupling_time == times[k - 1] for r in runs)
    return MixingEstimate(epsilon, int(times[k - 1]), m, (int(times[lo - 1]), int(times[hi - 1])),
                          censored, bool(cap_hit))


@dataclass
class SweepRow:
    tau_star: float
    t_hat: int
    band_lo: int
    band_hi: int
    theory_prediction: float
    trials: int
    censored_count: int


SWEEP_COLUMNS = ("tau_star", "t_hat", "band_lo", "band_hi", "theory_prediction", "trials", "censored_count")


def tau_sweep(graph: FactorGraph, tau_star_grid, support_max: int = 200, trials: int = 1000,
              rng: RngStream | None = None, epsilon: float = 0.25,
              cap: int = DEFAULT_CAP) -> list[SweepRow]:
    """t_hat(epsilon) under max-entropy delays for each target tau*.

    The prediction scales the measured delay-free estimate by 1 + alpha*tau*/n,
    with alpha the closed-form Ising influence bound.  Every grid point reuses
    the same per-trial streams.
    """
    rng = rng or RngStream(0)
    params = ising_params(graph)
    alpha = params.influence_bound()
    n = graph.n
    base = None
    rows = []
    for ts in tau_star_grid:
        dm = DelayModel.zero(n) if ts == 0 else DelayModel.maxent(support_max, ts, n)
        est = estimate_mixing_time(run_coupling_trials(graph, dm, trials, rng, cap, params=params), epsilon)
        if base is None:
            base = est.t_hat if ts == 0 else estimate_mixing_time(
                run_coupling_trials(graph, None, trials, rng, cap, params=params), epsilon).t_hat
        rows.append(SweepRow(float(ts), est.t_hat, est.band[0], est.band[1],
                             base * (1 + alpha * float(ts) / n), trials, est.censored_count))
    return rows
