"""Total influence of a factor graph and Dobrushin's condition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StateSpaceTooLarge
from .graph import FactorGraph, log_potential_table

INFLUENCE_CAP = 2**20


@dataclass
class InfluenceReport:
    alpha: float
    method: str                              # "exact-enumeration" | "ising-closed-form"
    per_variable_rows: np.ndarray | None     # rows[i, j] = influence of j on i
    n: int
    cap_used: int | None = None

    @property
    def dobrushin_satisfied(self) -> bool:
        return self.alpha < 1.0

    def to_json(self) -> dict:
        return {"alpha": float(self.alpha), "method": self.method,
                "dobrushin_satisfied": self.dobrushin_satisfied, "n": self.n,
                "cap_used": self.cap_used}


def _conditionals(logp: np.ndarray, i: int) -> np.ndarray:
    """pi_i(. | rest) laid out over the joint shape; axis i holds the outcome."""
    m = logp.max(axis=i, keepdims=True)
    w = np.exp(logp - m)
    return w / w.sum(axis=i, keepdims=True)


def _max_pair_tv(cond: np.ndarray, i: int, j: int) -> float:
    best = 0.0
    dj = cond.shape[j]
    for a in range(dj):
        ca = np.take(cond, a, axis=j)
        for b in range(a + 1, dj):
            cb = np.take(cond, b, axis=j)
            # after dropping axis j the outcome axis shifts down if it came later
            ax = i if i < j else i - 1
            tv = 0.5 * np.abs(ca - cb).sum(axis=ax)
            best = max(best, float(tv.max()))
    return best


def total_influence_exact(graph: FactorGraph, cap: int = INFLUENCE_CAP) -> InfluenceReport:
    """Exact alpha = max_i sum_j max_{X,Y differing only at j} TV(pi_i(.|X), pi_i(.|Y)).

    Each conditional is formed from the factors touching i only, so
    variables outside the Markov blanket have exactly zero influence.
    """
    if graph.num_states > cap:
        raise StateSpaceTooLarge(f"{graph.num_states} joint states exceed influence cap {cap}")
    n = graph.n
    rows = np.zeros((n, n))
    for i in range(n):
        factors = [graph.factors[k] for k in graph.factors_of[i]]
        if not factors:
            continue
        cond = _conditionals(log_potential_table(graph, cap, factors), i)
        for j in graph.blanket[i]:
            rows[i, j] = _max_pair_tv(cond, i, j)
    alpha = float(rows.sum(axis=1).max()) if n else 0.0
    return InfluenceReport(alpha, "exact-enumeration", rows, n, cap)


def ising_influence_bound(max_degree: int, beta: float) -> float:
    """Closed-form alpha <= degree * tanh(beta) for Ising models."""
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    return float(max_degree * np.tanh(beta))


def ising_influence_report(graph: FactorGraph, beta: float) -> InfluenceReport:
    return InfluenceReport(ising_influence_bound(graph.max_degree, beta), "ising-closed-form",
                           None, graph.n)
