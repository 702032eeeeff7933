"""Model constructors: the bias example, the slow-mixing two-bank model, random
degree-regular Ising models, and the builtin factor registry used by the
model JSON format.

Spins are stored as {0, 1} and mapped to sigma = 2v - 1 inside energies.
"""
from __future__ import annotations

import numpy as np

from .delays import build_maxent_delay  # noqa: F401  (re-exported: zoo constructor)
from .errors import ConfigError, GenerationFailure
from .graph import Factor, FactorGraph
from .rng import RngStream

BIAS_PENALTY = 40.0
BADMIX_M1 = 1e10


def _spin(a):
    return 2 * np.asarray(a, dtype=np.int64) - 1


# -- builtin factors --------------------------------------------------------

def bias_example_factor(scope=(0, 1), penalty: float = BIAS_PENALTY) -> Factor:
    table = np.zeros((2, 2))
    table[0, 0] = -float(penalty)
    return Factor(scope, table=table, builtin="bias_example", params={"penalty": float(penalty)})


def ising_edge_factor(scope, beta: float) -> Factor:
    b = float(beta)
    return Factor(scope, table=np.array([[b, -b], [-b, b]]), builtin="ising_edge", params={"beta": b})


def ising_prior_factor(scope, field: float) -> Factor:
    h = float(field)
    return Factor(scope, table=np.array([-h, h]), builtin="ising_prior", params={"field": h})


def badmix_phi_x(scope, M1: float = BADMIX_M1) -> Factor:
    M1 = float(M1)

    def fn(a):
        return -M1 * np.abs(_spin(a).sum(axis=1))

    return Factor(scope, fn=fn, builtin="badmix_phi_x", params={"M1": M1})


def badmix_phi_y(scope, beta: float, M2: float) -> Factor:
    N = len(scope) // 2
    beta, M2 = float(beta), float(M2)
    if len(scope) != 2 * N:
        raise ConfigError("badmix_phi_y scope must be the X bank followed by the Y bank")

    def fn(a):
        s = _spin(a)
        sx = s[:, :N].sum(axis=1)
        sy2 = s[:, N:].sum(axis=1).astype(np.float64) ** 2
        return np.where(np.abs(sx) == 1, (beta / N) * sy2, M2 * sy2)

    return Factor(scope, fn=fn, builtin="badmix_phi_y", params={"beta": beta, "M2": M2})


BUILTINS = {
    "bias_example": lambda scope, p: bias_example_factor(scope, p.get("penalty", BIAS_PENALTY)),
    "ising_edge": lambda scope, p: ising_edge_factor(scope, p["beta"]),
    "ising_prior": lambda scope, p: ising_prior_factor(scope, p["field"]),
    "badmix_phi_x": lambda scope, p: badmix_phi_x(scope, p.get("M1", BADMIX_M1)),
    "badmix_phi_y": lambda scope, p: badmix_phi_y(scope, p["beta"], p["M2"]),
}


def builtin_factor(name: str, scope, params: dict) -> Factor:
    try:
        make = BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown builtin factor {name!r}") from None
    return make(tuple(scope), dict(params or {}))


# -- model constructors -----------------------------------------------------

def build_bias_example(penalty: float = BIAS_PENALTY) -> FactorGraph:
    """Two binary variables; (0,0) is suppressed by a finite energy penalty."""
    return FactorGraph.from_domains([2, 2], [bias_example_factor((0, 1), penalty)],
                                    meta={"model": "bias_example", "penalty": penalty})


def build_badmix_model(N: int, beta: float, M1: float = BADMIX_M1, M2: float = 100.0) -> FactorGraph:
    """X bank = variables 0..N-1, Y bank = N..2N-1, all spins."""
    if N < 3 or N % 2 == 0:
        raise ConfigError("N must be an odd integer >= 3")
    if M1 < 0 or M2 < 0:
        raise ConfigError("M1, M2 must be nonnegative")
    xs = tuple(range(N))
    ys = tuple(range(N, 2 * N))
    factors = [badmix_phi_x(xs, M1), badmix_phi_y(xs + ys, beta, M2)]
    return FactorGraph.from_domains([2] * (2 * N), factors,
                                    meta={"model": "badmix", "N": N, "beta": beta, "M1": M1, "M2": M2})


def random_regular_edges(n: int, degree: int, rng: RngStream, max_tries: int = 1000) -> np.ndarray:
    """Uniform simple d-regular graph by the pairing model with rejection."""
    if degree < 0 or degree >= n or (n * degree) % 2:
        raise ConfigError(f"no simple {degree}-regular graph on {n} vertices")
    gen = np.random.default_rng(np.random.SeedSequence(rng.seed, spawn_key=(rng.stream, *rng.subkey)))
    stubs = np.repeat(np.arange(n, dtype=np.int64), degree)
    if stubs.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    for _ in range(max_tries):
        pairs = gen.permutation(stubs).reshape(-1, 2)
        pairs.sort(axis=1)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        keys = pairs[:, 0] * n + pairs[:, 1]
        if np.unique(keys).size != keys.size:
            continue
        return pairs[np.argsort(keys)]
    raise GenerationFailure(f"pairing model rejected {max_tries} times (n={n}, degree={degree})")


def build_ising(n: int, edges, beta, priors=None, meta: dict | None = None) -> FactorGraph:
    """Ising model on an explicit edge list; ``beta`` may be scalar or per edge."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    betas = np.broadcast_to(np.asarray(beta, dtype=np.float64), (len(edges),))
    factors = []
    shared = {}
    for (a, b), be in zip(edges.tolist(), betas.tolist()):
        t = shared.get(be)
        if t is None:
            t = np.array([[be, -be], [-be, be]])
            t.setflags(write=False)
            shared[be] = t
        factors.append(Factor((a, b), table=t, builtin="ising_edge", params={"beta": be}))
    if priors is not None:
        priors = np.broadcast_to(np.asarray(priors, dtype=np.float64), (n,))
        for v, h in enumerate(priors.tolist()):
            if h != 0.0:
                factors.append(ising_prior_factor((v,), h))
    return FactorGraph.from_domains([2] * n, factors, meta=meta)


def build_random_ising(n: int, degree: int, beta: float, priors=None, rng: RngStream | None = None) -> FactorGraph:
    rng = rng or RngStream(0)
    edges = random_regular_edges(n, degree, rng)
    meta = {"model": "random_ising", "n": n, "degree": degree, "beta": beta, "rng": rng.describe()}
    return build_ising(n, edges, beta, priors, meta=meta)
