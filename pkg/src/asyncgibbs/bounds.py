"""Closed-form bias, mixing-time and estimation-time bounds.

All logarithms are natural.  ``(x)_+`` denotes ``max(0, x)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

from .errors import ConfigError, DobrushinViolated, EpsilonTooSmall, NonConvexBoundFunction


@dataclass(frozen=True)
class BoundInputs:
    n: int
    alpha: float
    tau: float = 0.0
    tau_star: float = 0.0
    omega: int = 1
    epsilon: float = 0.25
    t: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        for name in ("alpha", "tau", "tau_star", "t"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if not 0 < self.epsilon <= 1:
            raise ConfigError("epsilon must lie in (0, 1]")
        if not 1 <= self.omega <= self.n:
            raise ConfigError("omega must lie in [1, n]")

    def replace(self, **kw) -> "BoundInputs":
        return BoundInputs(**{**asdict(self), **kw})


@dataclass(frozen=True)
class BoundResult:
    bound_name: str
    inputs: BoundInputs
    value: float | None
    guard_satisfied: bool
    violation: str | None = None    # exception name when the guard fails

    def to_json(self) -> dict:
        return {"bound_name": self.bound_name, "inputs": asdict(self.inputs),
                "value": self.value, "guard_satisfied": self.guard_satisfied,
                "violation": self.violation}


def _pos(x: float) -> float:
    return max(0.0, x)


def _require_dobrushin(alpha: float):
    if alpha >= 1:
        raise DobrushinViolated(f"alpha={alpha} >= 1")


def _seq_estimation_real(n, alpha, omega, eps) -> float:
    return n / (1 - alpha) * math.log(omega / eps)


def bound_seq_sparse_estimation(inp: BoundInputs) -> int:
    """ceil(n/(1-alpha) * ln(omega/eps)), floored at 0."""
    _require_dobrushin(inp.alpha)
    return max(0, math.ceil(_seq_estimation_real(inp.n, inp.alpha, inp.omega, inp.epsilon)))


def hog_estimation_guard(inp: BoundInputs) -> float:
    """Smallest epsilon for which the asynchronous estimation bound applies."""
    return 2 * inp.omega * inp.alpha * inp.tau / ((1 - inp.alpha) * inp.n)


def bound_hog_sparse_estimation(inp: BoundInputs) -> int:
    _require_dobrushin(inp.alpha)
    if inp.epsilon < hog_estimation_guard(inp):
        raise EpsilonTooSmall(f"epsilon={inp.epsilon} below {hog_estimation_guard(inp)}")
    a = inp.alpha
    val = _seq_estimation_real(inp.n, a, inp.omega, inp.epsilon) \
        + 2 * inp.omega * a * inp.tau / ((1 - a) ** 2 * inp.epsilon)
    return max(0, math.ceil(val))


def bound_hogwild_bias(inp: BoundInputs) -> float:
    """Sparse-variation bias after t steps: (omega*alpha*tau*t/n^2) exp((alpha-1)_+ t/n)."""
    n, a = inp.n, inp.alpha
    return inp.omega * a * inp.tau * inp.t / n**2 * math.exp(_pos(a - 1) / n * inp.t)


def _check_convex_decreasing(fn: Callable[[float], float], eps: float):
    pts = [eps / 2, eps, 1.5 * eps]
    v = [float(fn(e)) for e in pts]
    if not (v[0] >= v[1] >= v[2]):
        raise NonConvexBoundFunction(f"bound function is not decreasing near {eps}: {v}")
    # equally spaced points: convexity means the midpoint lies below the chord
    if v[1] > 0.5 * (v[0] + v[2]) + 1e-9 * max(1.0, abs(v[1])):
        raise NonConvexBoundFunction(f"bound function is not convex near {eps}: {v}")


def general_bias_guard(inp: BoundInputs, seq_bound_fn: Callable[[float], float]) -> float:
    c = float(seq_bound_fn(inp.epsilon / 2)) / inp.n
    return 2 * inp.omega * inp.alpha * inp.tau * c / inp.n * math.exp(c * _pos(inp.alpha - 1))


def bound_general_bias_estimation(inp: BoundInputs, seq_bound_fn: Callable[[float], float]) -> int:
    """Estimation-time bound for the asynchronous chain from any sequential bound.

    ``seq_bound_fn`` maps epsilon to a (real-valued) sequential estimation
    time; it must be convex and decreasing, which is spot-checked.
    """
    _check_convex_decreasing(seq_bound_fn, inp.epsilon)
    eps = inp.epsilon
    c = float(seq_bound_fn(eps / 2)) / inp.n
    growth = math.exp(c * _pos(inp.alpha - 1))
    guard = 2 * inp.omega * inp.alpha * inp.tau * c / inp.n * growth
    if eps < guard:
        raise EpsilonTooSmall(f"epsilon={eps} below {guard}")
    val = float(seq_bound_fn(eps)) + 2 * inp.omega * inp.alpha * inp.tau * c**2 / eps * growth
    return max(0, math.ceil(val))


def seq_estimation_fn(n: int, alpha: float, omega: int = 1) -> Callable[[float], float]:
    """Real-valued sequential estimation bound as a function of epsilon."""
    _require_dobrushin(alpha)
    return lambda eps: _seq_estimation_real(n, alpha, omega, eps)


def bound_mixing(inp: BoundInputs, variant: str = "sequential") -> float:
    """Mixing-time bound; the asynchronous variant replaces n by n + alpha*tau_star."""
    _require_dobrushin(inp.alpha)
    log_term = math.log(inp.n / inp.epsilon)
    if variant == "sequential":
        return inp.n / (1 - inp.alpha) * log_term
    if variant == "hogwild":
        return (inp.n + inp.alpha * inp.tau_star) / (1 - inp.alpha) * log_term
    raise ConfigError(f"unknown mixing variant {variant!r}")


BOUNDS = {
    "seq_sparse_estimation": bound_seq_sparse_estimation,
    "hog_sparse_estimation": bound_hog_sparse_estimation,
    "hogwild_bias": bound_hogwild_bias,
    "mixing_sequential": lambda inp: bound_mixing(inp, "sequential"),
    "mixing_hogwild": lambda inp: bound_mixing(inp, "hogwild"),
    "general_bias_estimation": lambda inp: bound_general_bias_estimation(
        inp, seq_estimation_fn(inp.n, inp.alpha, inp.omega)),
}


def evaluate(name: str, inp: BoundInputs) -> BoundResult:
    """Evaluate a named bound, reporting guard failures instead of raising."""
    try:
        fn = BOUNDS[name]
    except KeyError:
        raise ConfigError(f"unknown bound {name!r}") from None
    try:
        return BoundResult(name, inp, float(fn(inp)), True)
    except (DobrushinViolated, EpsilonTooSmall) as e:
        return BoundResult(name, inp, None, False, type(e).__name__)
