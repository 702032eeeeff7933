"""Staleness (delay) laws for simulated asynchronous execution.

Every i.i.d. delay law is represented by a pmf over ``{0, ..., support_max}``.
The two-thread pattern is not an i.i.d. law; it is a schedule the samplers
interpret directly (pairs of "async" variables updated from one snapshot).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import ConfigError, UnattainableTauStar
from .rng import RngStream

KINDS = ("zero", "constant", "iid-bernoulli", "maxent", "two-thread-pattern")


def tau_star_of(pmf: np.ndarray, n: int) -> float:
    """Smallest tau* with E[exp(delay/n)] <= 1 + tau*/n."""
    k = np.arange(len(pmf))
    return float(n * (np.dot(pmf, np.expm1(k / n))))


@dataclass(frozen=True)
class DelayModel:
    kind: str
    pmf: np.ndarray = field(repr=False)
    n: int
    params: dict = field(default_factory=dict)
    reported_tau: float = 0.0
    reported_tau_star: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown delay kind {self.kind!r}")

    @property
    def support_max(self) -> int:
        return len(self.pmf) - 1

    @property
    def effective_max(self) -> int:
        """Largest delay with nonzero probability."""
        nz = np.flatnonzero(self.pmf > 0)
        return int(nz[-1]) if nz.size else 0

    @property
    def is_pattern(self) -> bool:
        return self.kind == "two-thread-pattern"

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.pmf)
        c[-1] = 1.0
        return c

    def sample(self, size: int, rng: RngStream) -> np.ndarray:
        if self.is_pattern:
            raise ConfigError("the two-thread pattern is a schedule, not an i.i.d. delay law")
        gen = np.random.default_rng(np.random.SeedSequence(rng.seed, spawn_key=(rng.stream, *rng.subkey)))
        return gen.choice(len(self.pmf), size=size, p=self.pmf)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params,
            "n": self.n,
            "support_max": self.support_max,
            "tau": self.reported_tau,
            "tau_star": self.reported_tau_star,
        }

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_pmf(cls, kind: str, pmf, n: int, params: dict | None = None) -> "DelayModel":
        pmf = np.asarray(pmf, dtype=np.float64)
        if pmf.ndim != 1 or np.any(pmf < 0) or abs(pmf.sum() - 1.0) > 1e-12:
            raise ConfigError("delay pmf must be a nonnegative vector summing to 1")
        pmf.setflags(write=False)
        tau = float(np.dot(np.arange(len(pmf)), pmf))
        return cls(kind, pmf, int(n), dict(params or {}), tau, tau_star_of(pmf, n))

    @classmethod
    def zero(cls, n: int = 1) -> "DelayModel":
        return cls.from_pmf("zero", [1.0], n)

    @classmethod
    def constant(cls, k: int, n: int = 1) -> "DelayModel":
        if k < 0:
            raise ConfigError("constant delay must be >= 0")
        pmf = np.zeros(k + 1)
        pmf[k] = 1.0
        return cls.from_pmf("constant", pmf, n, {"k": k})

    @classmethod
    def iid_bernoulli(cls, rho: float, k: int, n: int = 1) -> "DelayModel":
        """Delay ``k`` with probability ``rho``, otherwise 0."""
        if not 0.0 <= rho <= 1.0 or k < 1:
            raise ConfigError("iid-bernoulli needs 0 <= rho <= 1 and k >= 1")
        pmf = np.zeros(k + 1)
        pmf[0] = 1.0 - rho
        pmf[k] += rho
        return cls.from_pmf("iid-bernoulli", pmf, n, {"rho": rho, "k": k})

    @classmethod
    def maxent(cls, support_max: int, tau_star: float, n: int) -> "DelayModel":
        spec = build_maxent_delay(support_max, tau_star, n)
        return cls.from_pmf("maxent", spec.pmf, n, {"support_max": support_max, "tau_star": tau_star})

    @classmethod
    def two_thread_pattern(cls, n: int, async_vars=None) -> "DelayModel":
        """Pairs of async variables read one shared snapshot; others update synchronously.

        ``async_vars`` defaults to every variable.  Each write reads values at
        most one write old, so the reported bounds use a delay of 1.
        """
        params = {"async_vars": None if async_vars is None else [int(v) for v in async_vars]}
        pmf = np.array([0.0, 1.0])
        return cls("two-thread-pattern", pmf, int(n), params, 1.0, tau_star_of(pmf, n))

    @classmethod
    def from_dict(cls, d: dict, n: int) -> "DelayModel":
        kind = d.get("kind", "zero")
        try:
            return cls._from_dict(kind, d, n)
        except (KeyError, TypeError) as e:
            raise ConfigError(f"delay model {kind!r}: missing or invalid field {e}") from None

    @classmethod
    def _from_dict(cls, kind: str, d: dict, n: int) -> "DelayModel":
        if kind == "zero":
            return cls.zero(n)
        if kind == "constant":
            return cls.constant(int(d["k"]), n)
        if kind == "iid-bernoulli":
            return cls.iid_bernoulli(float(d["rho"]), int(d["k"]), n)
        if kind == "maxent":
            return cls.maxent(int(d.get("support_max", 200)), float(d["tau_star"]), n)
        if kind == "two-thread-pattern":
            return cls.two_thread_pattern(n, d.get("async_vars"))
        raise ConfigError(f"unknown delay kind {kind!r}")


@dataclass(frozen=True)
class MaxEntDelaySpec:
    support_max: int
    target_tau_star: float
    n: int
    lam: float
    pmf: np.ndarray = field(repr=False)

    @property
    def reported_tau(self) -> float:
        return float(np.dot(np.arange(self.support_max + 1), self.pmf))

    @property
    def constraint_residual(self) -> float:
        k = np.arange(self.support_max + 1)
        return float(np.dot(self.pmf, np.exp(k / self.n)) - (1.0 + self.target_tau_star / self.n))


def max_tau_star(support_max: int, n: int) -> float:
    return n * math.expm1(support_max / n)


def _tilted_pmf(lam: float, g: np.ndarray) -> np.ndarray:
    logw = lam * g
    return np.exp(logw - logsumexp(logw))


def build_maxent_delay(support_max: int, target_tau_star: float, n: int) -> MaxEntDelaySpec:
    """Maximum-entropy pmf on {0..support_max} with E[exp(k/n)] = 1 + tau*/n.

    The maximizer is the exponential family ``pmf(k) ∝ exp(lam * exp(k/n))``;
    ``lam`` is found by root bracketing on the moment constraint.  The two
    extremes of the attainable range are returned as exact point masses.
    """
    if support_max < 0 or n < 1:
        raise ConfigError("need support_max >= 0 and n >= 1")
    hi = max_tau_star(support_max, n)
    if target_tau_star < 0 or target_tau_star > hi * (1 + 1e-12):
        raise UnattainableTauStar(f"tau*={target_tau_star} outside [0, {hi}] for support {support_max}, n={n}")
    pmf = np.zeros(support_max + 1)
    if target_tau_star == 0 or support_max == 0:
        pmf[0] = 1.0
        return MaxEntDelaySpec(support_max, float(target_tau_star), n, -math.inf, pmf)
    if target_tau_star >= hi:
        pmf[-1] = 1.0
        return MaxEntDelaySpec(support_max, float(target_tau_star), n, math.inf, pmf)

    k = np.arange(support_max + 1)
    # centred moment function keeps lam on a reasonable scale
    g = np.expm1(k / n) * n            # = n (exp(k/n) - 1), in [0, hi]
    target = float(target_tau_star)

    def resid(lam):
        return float(np.dot(_tilted_pmf(lam, g), g)) - target

    a, b = -1.0, 1.0
    while resid(a) > 0:
        a *= 2.0
    while resid(b) < 0:
        b *= 2.0
    lam = brentq(resid, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    pmf = _tilted_pmf(lam, g)
    # lam is reported for the exp(k/n) parameterization
    return MaxEntDelaySpec(support_max, target, n, lam * n, pmf)
