"""Discrete factor graphs, exact conditionals and brute-force oracles.

A graph defines ``pi(x) ∝ exp(sum_f energy_f(x_scope(f)))``.  Factors carry
either a dense energy table over their scope or a vectorized callback
``fn(assignments) -> energies`` where ``assignments`` is an ``(m, |scope|)``
integer array.  Joint states are indexed in C order (variable 0 is the most
significant digit).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, StateSpaceTooLarge

DEFAULT_ENUMERATION_CAP = 2**24
MAX_MARGINAL_SUBSET = 16


@dataclass(frozen=True)
class VariableSpec:
    id: int
    domain_size: int

    def __post_init__(self):
        if self.domain_size < 2:
            raise ConfigError(f"variable {self.id}: domain_size must be >= 2")


class Factor:
    """Energy term over an ordered scope of variables.

    Exactly one of ``table`` / ``fn`` is set.  ``builtin`` and ``params``
    record the constructor name so the model JSON format can round-trip
    callback factors.
    """

    __slots__ = ("scope", "table", "fn", "builtin", "params")

    def __init__(self, scope: Sequence[int], table=None, fn: Callable | None = None,
                 builtin: str | None = None, params: dict | None = None):
        self.scope = tuple(int(v) for v in scope)
        if len(set(self.scope)) != len(self.scope):
            raise ConfigError(f"factor scope has repeated variables: {self.scope}")
        if (table is None) == (fn is None):
            raise ConfigError("a factor needs exactly one of table / fn")
        if table is not None:
            table = np.asarray(table, dtype=np.float64)
            if table.flags.writeable:  # read-only tables may be shared between factors
                table = table.copy()
            if table.ndim != len(self.scope):
                raise ConfigError("table rank must equal scope length")
            if not np.all(np.isfinite(table)):
                raise ConfigError("factor energies must be finite")
            table.setflags(write=False)
        self.table = table
        self.fn = fn
        self.builtin = builtin
        self.params = dict(params or {})

    @property
    def is_table(self) -> bool:
        return self.table is not None

    def energies(self, assignments: np.ndarray) -> np.ndarray:
        """Energies for an ``(m, |scope|)`` array of scope assignments."""
        assignments = np.asarray(assignments, dtype=np.int64)
        if self.table is not None:
            return self.table[tuple(assignments.T)]
        out = np.asarray(self.fn(assignments), dtype=np.float64)
        return out

    def __repr__(self):
        kind = "table" if self.is_table else f"fn:{self.builtin or 'custom'}"
        return f"Factor(scope={self.scope}, {kind})"


class FactorGraph:
    """Immutable collection of variables and factors."""

    def __init__(self, variables: Sequence[VariableSpec], factors: Sequence[Factor] = (),
                 meta: dict | None = None):
        variables = tuple(variables)
        self.meta = dict(meta or {})
        ids = sorted(v.id for v in variables)
        if ids != list(range(len(variables))):
            raise ConfigError("variable ids must be exactly 0..n-1")
        self.variables = tuple(sorted(variables, key=lambda v: v.id))
        self.factors = tuple(factors)
        self.n = len(self.variables)
        self.domain_sizes = np.array([v.domain_size for v in self.variables], dtype=np.int64)
        self.domain_sizes.setflags(write=False)

        touching: list[list[int]] = [[] for _ in range(self.n)]
        for fi, f in enumerate(self.factors):
            for v in f.scope:
                if not 0 <= v < self.n:
                    raise ConfigError(f"factor {fi} references unknown variable {v}")
                touching[v].append(fi)
            if f.is_table:
                expect = tuple(int(self.domain_sizes[v]) for v in f.scope)
                if f.table.shape != expect:
                    raise ConfigError(f"factor {fi}: table shape {f.table.shape} != {expect}")
        self.factors_of = tuple(tuple(t) for t in touching)
        blanket = []
        for i in range(self.n):
            nb = set()
            for fi in self.factors_of[i]:
                nb.update(self.factors[fi].scope)
            nb.discard(i)
            blanket.append(tuple(sorted(nb)))
        self.blanket = tuple(blanket)
        self._compiled = None

    @classmethod
    def from_domains(cls, domain_sizes: Sequence[int], factors: Sequence[Factor] = (), meta=None):
        return cls([VariableSpec(i, int(d)) for i, d in enumerate(domain_sizes)], factors, meta)

    @property
    def all_tables(self) -> bool:
        return all(f.is_table for f in self.factors)

    @property
    def num_states(self) -> int:
        return int(np.prod(self.domain_sizes, dtype=object))

    @property
    def max_degree(self) -> int:
        return max((len(b) for b in self.blanket), default=0)

    def validate_state(self, state) -> np.ndarray:
        x = np.asarray(state, dtype=np.int64)
        if x.shape != (self.n,):
            raise ConfigError(f"state must have length {self.n}")
        if np.any(x < 0) or np.any(x >= self.domain_sizes):
            raise ConfigError("state value out of domain")
        return x

    def compiled(self) -> "CompiledGraph":
        if self._compiled is None:
            self._compiled = compile_graph(self)
        return self._compiled

    def __repr__(self):
        return f"FactorGraph(n={self.n}, factors={len(self.factors)})"


class ExactDistribution:
    """Joint probabilities as an n-dimensional array indexed by state."""

    def __init__(self, probabilities: np.ndarray):
        p = np.asarray(probabilities, dtype=np.float64)
        p.setflags(write=False)
        self.probabilities = p
        self.variables = tuple(range(p.ndim))

    @property
    def domain_sizes(self) -> tuple[int, ...]:
        return self.probabilities.shape

    def __getitem__(self, state) -> float:
        return float(self.probabilities[tuple(state)])

    def table(self) -> np.ndarray:
        return self.probabilities


# ---------------------------------------------------------------------------
# Operations


def energy(graph: FactorGraph, state) -> float:
    x = np.asarray(state, dtype=np.int64)
    total = 0.0
    for f in graph.factors:
        total += float(f.energies(x[list(f.scope)][None, :])[0])
    return total


def _softmax(logw: np.ndarray) -> np.ndarray:
    w = np.exp(logw - logw.max())
    return w / w.sum()


def conditional_distribution(graph: FactorGraph, state, i: int) -> np.ndarray:
    """Distribution of variable ``i`` given the rest of ``state``.

    Only factors whose scope contains ``i`` are evaluated.
    """
    x = np.asarray(state, dtype=np.int64)
    d = int(graph.domain_sizes[i])
    logw = np.zeros(d)
    for fi in graph.factors_of[i]:
        f = graph.factors[fi]
        rows = np.repeat(x[list(f.scope)][None, :], d, axis=0)
        rows[:, f.scope.index(i)] = np.arange(d)
        logw += f.energies(rows)
    return _softmax(logw)


def all_states(domain_sizes: Sequence[int]) -> np.ndarray:
    """Every joint state in C order as an ``(S, n)`` array."""
    dims = tuple(int(d) for d in domain_sizes)
    if not dims:
        return np.zeros((1, 0), dtype=np.int64)
    return np.indices(dims).reshape(len(dims), -1).T.astype(np.int64)


def log_potential_table(graph: FactorGraph, cap: int = DEFAULT_ENUMERATION_CAP,
                        factors: Sequence[Factor] | None = None) -> np.ndarray:
    """Unnormalized log-density over the full joint space, shaped by domains.

    ``factors`` restricts the sum to a subset of the graph's factors.
    """
    if graph.num_states > cap:
        raise StateSpaceTooLarge(f"{graph.num_states} joint states exceed cap {cap}")
    shape = tuple(int(d) for d in graph.domain_sizes)
    logp = np.zeros(shape)
    states = None
    for f in graph.factors if factors is None else factors:
        if f.is_table:
            # broadcast the table into the joint shape
            order = np.argsort(f.scope)
            t = np.transpose(f.table, order)
            bshape = [1] * graph.n
            for v in f.scope:
                bshape[v] = shape[v]
            logp = logp + t.reshape(bshape)
        else:
            if states is None:
                states = all_states(shape)
            logp = logp + f.energies(states[:, list(f.scope)]).reshape(shape)
    return logp


def exact_distribution(graph: FactorGraph, cap: int = DEFAULT_ENUMERATION_CAP) -> ExactDistribution:
    logp = log_potential_table(graph, cap)
    return ExactDistribution(np.exp(logp - logsumexp(logp)))


def marginal(dist, subset: Sequence[int]) -> np.ndarray:
    """Probability table over ``subset`` (axes in the given order).

    Works for :class:`ExactDistribution` and for empirical distributions
    (``EmpiricalDistribution`` from :mod:`asyncgibbs.sinks`); an empirical
    input returns counts normalized by the empirical total.
    """
    subset = [int(v) for v in subset]
    if len(subset) > MAX_MARGINAL_SUBSET:
        raise ConfigError(f"marginal subsets are limited to {MAX_MARGINAL_SUBSET} variables")
    if len(set(subset)) != len(subset):
        raise ConfigError("subset has repeated variables")
    if hasattr(dist, "marginal_counts"):
        counts = dist.marginal_counts(subset)
        return counts / counts.sum()
    table = dist.probabilities if isinstance(dist, ExactDistribution) else np.asarray(dist)
    variables = tuple(range(table.ndim))
    return marginalize_table(table, variables, subset)


def marginalize_table(table: np.ndarray, variables: Sequence[int], subset: Sequence[int]) -> np.ndarray:
    variables = list(variables)
    for v in subset:
        if v not in variables:
            raise ConfigError(f"variable {v} not covered by table over {variables}")
    drop = tuple(k for k, v in enumerate(variables) if v not in subset)
    out = table.sum(axis=drop) if drop else table
    kept = [v for v in variables if v in subset]
    return np.transpose(out, [kept.index(v) for v in subset])


# ---------------------------------------------------------------------------
# Flattened, numba-friendly representation (table factors only)


class CompiledGraph(NamedTuple):
    n: int
    dom: np.ndarray            # int64[n]
    scope_ptr: np.ndarray      # int64[F+1]
    scope: np.ndarray          # int64[sum |scope|]
    stride: np.ndarray         # int64[sum |scope|], C-order strides within each table
    table_ptr: np.ndarray      # int64[F]
    tables: np.ndarray         # float64[sum table sizes]
    vf_ptr: np.ndarray         # int64[n+1]
    vf: np.ndarray             # factors touching each variable
    bl_ptr: np.ndarray         # int64[n+1]
    bl: np.ndarray             # markov blanket of each variable
    max_dom: int


def c_strides(shape) -> list[int]:
    out = [1] * len(shape)
    for k in range(len(shape) - 2, -1, -1):
        out[k] = out[k + 1] * int(shape[k + 1])
    return out


def compile_graph(graph: FactorGraph) -> CompiledGraph:
    if not graph.all_tables:
        raise ConfigError("compiled kernels need table factors; callback factors are Python-only")
    scope_ptr = [0]
    scope, stride, table_ptr, tables = [], [], [], []
    off = 0
    for f in graph.factors:
        scope.extend(f.scope)
        stride.extend(c_strides(f.table.shape))
        scope_ptr.append(len(scope))
        table_ptr.append(off)
        tables.append(f.table.ravel())
        off += f.table.size
    vf_ptr = np.zeros(graph.n + 1, dtype=np.int64)
    vf_ptr[1:] = np.cumsum([len(t) for t in graph.factors_of])
    bl_ptr = np.zeros(graph.n + 1, dtype=np.int64)
    bl_ptr[1:] = np.cumsum([len(b) for b in graph.blanket])

    def _flat(seqs):
        return np.fromiter((v for s in seqs for v in s), dtype=np.int64)

    return CompiledGraph(
        n=graph.n,
        dom=np.ascontiguousarray(graph.domain_sizes, dtype=np.int64),
        scope_ptr=np.asarray(scope_ptr, dtype=np.int64),
        scope=np.asarray(scope, dtype=np.int64),
        stride=np.asarray(stride, dtype=np.int64),
        table_ptr=np.asarray(table_ptr, dtype=np.int64),
        tables=np.concatenate(tables) if tables else np.zeros(0),
        vf_ptr=vf_ptr,
        vf=_flat(graph.factors_of),
        bl_ptr=bl_ptr,
        bl=_flat(graph.blanket),
        max_dom=int(graph.domain_sizes.max()) if graph.n else 1,
    )
