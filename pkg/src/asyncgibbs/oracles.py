"""Exact Markov-chain oracles for small models.

Each oracle enumerates the chain a sampler actually runs (random-scan Gibbs,
Gibbs with i.i.d. stale reads over an extended history state, or the
two-thread pattern with a pending second write) directly from
``conditional_distribution``.  From the transition matrix we get the
stationary law of the recorded state and the Markov-chain CLT covariance of
its empirical histogram, which gives a goodness-of-fit test that is valid
for autocorrelated samples.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .delays import DelayModel
from .errors import ConfigError
from .graph import FactorGraph, all_states, conditional_distribution

MAX_ORACLE_STATES = 20000


@dataclass
class ChainOracle:
    P: np.ndarray            # (m, m) row-stochastic
    proj: np.ndarray         # (m,) joint-state index of the recorded state
    num_joint: int
    start: int

    def stationary(self, tol: float = 1e-15, max_iter: int = 200) -> np.ndarray:
        if getattr(self, "_pi", None) is not None:
            return self._pi
        mu = np.zeros(len(self.P))
        mu[self.start] = 1.0
        # lazy kernel: same stationary law, aperiodic; repeated squaring
        Q = 0.5 * (self.P + np.eye(len(self.P)))
        for _ in range(max_iter):
            nxt = mu @ Q
            done = np.abs(nxt - mu).sum() < tol
            mu = nxt / nxt.sum()
            if done:
                break
            Q = Q @ Q
            Q /= Q.sum(axis=1, keepdims=True)
        self._pi = mu
        return mu

    def recorded_stationary(self) -> np.ndarray:
        return np.bincount(self.proj, weights=self.stationary(), minlength=self.num_joint)

    def histogram_covariance(self) -> np.ndarray:
        """Asymptotic covariance Γ with sqrt(N)(f_hat - f) -> N(0, Γ)."""
        pi = self.stationary()
        m = len(pi)
        Z = np.linalg.inv(np.eye(m) - self.P + np.outer(np.ones(m), pi))
        D = np.diag(pi)
        A = D @ Z - np.outer(pi, pi)
        C = A + A.T - (D - np.outer(pi, pi))
        G = np.zeros((m, self.num_joint))
        G[np.arange(m), self.proj] = 1.0
        return G.T @ C @ G


def sequential_oracle(graph: FactorGraph, start=None) -> ChainOracle:
    states = all_states(graph.domain_sizes)
    S = len(states)
    if S > MAX_ORACLE_STATES:
        raise ConfigError("model too large for an exact chain oracle")
    dims = tuple(int(d) for d in graph.domain_sizes)
    P = np.zeros((S, S))
    for a, x in enumerate(states):
        for i in range(graph.n):
            p = conditional_distribution(graph, x, i)
            for z in range(dims[i]):
                y = x.copy()
                y[i] = z
                P[a, np.ravel_multi_index(tuple(y), dims)] += p[z] / graph.n
    s0 = 0 if start is None else int(np.ravel_multi_index(tuple(start), dims))
    return ChainOracle(P, np.arange(S), S, s0)


def delayed_oracle(graph: FactorGraph, delay: DelayModel, start=None) -> ChainOracle:
    """Chain on histories (x_t, x_{t-1}, ..., x_{t-k}) for an i.i.d. delay law.

    Starting from a constant history reproduces the sampler's clamping of
    delays to the elapsed time.
    """
    if delay.is_pattern:
        raise ConfigError("use two_thread_oracle for the pattern schedule")
    k = delay.effective_max
    dims = tuple(int(d) for d in graph.domain_sizes)
    pmf = np.asarray(delay.pmf[:k + 1])
    x0 = tuple(int(v) for v in (np.zeros(graph.n, dtype=int) if start is None else start))
    s0 = tuple([x0] * (k + 1))
    index = {s0: 0}
    order = [s0]
    rows: list[dict] = []
    q = 0
    while q < len(order):
        hist = order[q]
        q += 1
        out: dict[int, float] = {}
        for i in range(graph.n):
            bl = graph.blanket[i]
            for ds in itertools.product(range(k + 1), repeat=len(bl)):
                w = np.prod([pmf[d] for d in ds]) if bl else 1.0
                if w == 0.0:
                    continue
                view = np.array(hist[0])
                for j, d in zip(bl, ds):
                    view[j] = hist[d][j]
                p = conditional_distribution(graph, view, i)
                for z in range(dims[i]):
                    nxt_x = list(hist[0])
                    nxt_x[i] = z
                    nxt = (tuple(nxt_x),) + hist[:k]
                    if nxt not in index:
                        index[nxt] = len(order)
                        order.append(nxt)
                        if len(order) > MAX_ORACLE_STATES:
                            raise ConfigError("extended chain too large")
                    col = index[nxt]
                    out[col] = out.get(col, 0.0) + w * p[z] / graph.n
        rows.append(out)
    m = len(order)
    P = np.zeros((m, m))
    for r, out in enumerate(rows):
        for c, v in out.items():
            P[r, c] = v
    proj = np.array([np.ravel_multi_index(h[0], dims) for h in order])
    return ChainOracle(P, proj, int(np.prod(dims)), 0)


def two_thread_oracle(graph: FactorGraph, async_vars=None, start=None) -> ChainOracle:
    """Write-level chain of the two-thread pattern: state = (x, pending second write)."""
    dims = tuple(int(d) for d in graph.domain_sizes)
    A = list(range(graph.n)) if async_vars is None else sorted(set(int(v) for v in async_vars))
    Aset = set(A)
    x0 = tuple(int(v) for v in (np.zeros(graph.n, dtype=int) if start is None else start))
    s0 = (x0, None)
    index = {s0: 0}
    order = [s0]
    rows = []

    def add(out, state, w):
        if state not in index:
            index[state] = len(order)
            order.append(state)
            if len(order) > MAX_ORACLE_STATES:
                raise ConfigError("pattern chain too large")
        c = index[state]
        out[c] = out.get(c, 0.0) + w

    q = 0
    while q < len(order):
        x, pending = order[q]
        q += 1
        out: dict[int, float] = {}
        if pending is not None:
            j, z = pending
            y = list(x)
            y[j] = z
            add(out, (tuple(y), None), 1.0)
        else:
            xa = np.array(x)
            for i in range(graph.n):
                pi_ = conditional_distribution(graph, xa, i)
                if i in Aset and len(A) >= 2:
                    others = [j for j in A if j != i]
                    for j in others:
                        pj = conditional_distribution(graph, xa, j)
                        for zi in range(dims[i]):
                            for zj in range(dims[j]):
                                y = list(x)
                                y[i] = zi
                                add(out, (tuple(y), (j, zj)), pi_[zi] * pj[zj] / graph.n / len(others))
                else:
                    for zi in range(dims[i]):
                        y = list(x)
                        y[i] = zi
                        add(out, (tuple(y), None), pi_[zi] / graph.n)
        rows.append(out)
    m = len(order)
    P = np.zeros((m, m))
    for r, out in enumerate(rows):
        for c, v in out.items():
            P[r, c] = v
    proj = np.array([np.ravel_multi_index(s[0], dims) for s in order])
    return ChainOracle(P, proj, int(np.prod(dims)), 0)


@dataclass
class ChainGofResult:
    statistic: float
    df: int
    pvalue: float
    max_abs_z: float             # largest per-cell |f_hat - f| / sigma
    negligible_mass_count: int   # samples observed in cells with expected mass < floor


def markov_chi2(counts, oracle: ChainOracle, mass_floor: float = 1e-9) -> ChainGofResult:
    """Wald-form chi-square of an MCMC histogram against an exact chain oracle.

    Uses the Markov-chain CLT covariance instead of the multinomial one.
    Cells with stationary mass below ``mass_floor`` are excluded from the
    statistic and their observed counts reported separately.
    """
    counts = np.asarray(counts, dtype=np.float64).ravel()
    N = counts.sum()
    f = oracle.recorded_stationary()
    G = oracle.histogram_covariance()
    keep = f >= mass_floor
    neg = int(counts[~keep].sum())
    d = (counts / N - f)[keep]
    Gk = G[np.ix_(keep, keep)]
    # the kept cells sum to ~1, so Gk is singular along the all-ones direction
    w, V = np.linalg.eigh(Gk)
    tol = w.max() * 1e-10
    good = w > tol
    proj = V[:, good].T @ d
    stat = float(N * np.sum(proj ** 2 / w[good]))
    df = int(good.sum())
    sig = np.sqrt(np.clip(np.diag(Gk), 1e-300, None) / N)
    return ChainGofResult(stat, df, float(stats.chi2.sf(stat, df)), float(np.max(np.abs(d) / sig)), neg)
