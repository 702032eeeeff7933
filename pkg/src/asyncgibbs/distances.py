"""Total variation and sparse variation distances between joint tables."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch, SubsetSpaceTooLarge

MAX_SV_VARIABLES = 20


@dataclass(frozen=True)
class DistanceResult:
    value: float
    kind: str            # "tv" or "sparse-variation(omega)"
    inputs: dict

    def to_json(self) -> dict:
        return {"value": self.value, "kind": self.kind, "inputs": self.inputs}


def _as_prob(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    s = p.sum()
    return p / s if s > 0 else p


def tv_distance(p, q) -> float:
    """Half the L1 distance between two tables over the same support."""
    p, q = _as_prob(p), _as_prob(q)
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes differ: {p.shape} vs {q.shape}")
    return float(0.5 * np.abs(p - q).sum())


def _joint_shape(p: np.ndarray, n: int) -> np.ndarray:
    if p.ndim == n:
        return p
    if p.ndim == 1 and p.size == 2**n:
        return p.reshape((2,) * n)
    raise DimensionMismatch(f"table of shape {p.shape} is not a joint over {n} variables")


def sparse_variation_distance(p, q, omega: int, n: int) -> float:
    """max over variable subsets I with |I| = omega of TV between the I-marginals.

    Smaller subsets never exceed this, since marginalizing cannot increase TV.
    Flat tables of length 2**n are read as binary joints in C order.
    """
    if n > MAX_SV_VARIABLES:
        raise SubsetSpaceTooLarge(f"n={n} exceeds subset enumeration limit {MAX_SV_VARIABLES}")
    if not 1 <= omega <= n:
        raise ConfigError("omega must satisfy 1 <= omega <= n")
    p, q = _as_prob(p), _as_prob(q)
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes differ: {p.shape} vs {q.shape}")
    d = _joint_shape(p - q, n)
    axes = set(range(n))
    best = 0.0
    for sub in itertools.combinations(range(n), omega):
        m = d.sum(axis=tuple(sorted(axes - set(sub)))) if omega < n else d
        best = max(best, 0.5 * float(np.abs(m).sum()))
    return best


def distance(p, q, omega: int | None = None, n: int | None = None, **inputs) -> DistanceResult:
    if omega is None:
        return DistanceResult(tv_distance(p, q), "tv", inputs)
    return DistanceResult(sparse_variation_distance(p, q, omega, n), f"sparse-variation({omega})", inputs)
