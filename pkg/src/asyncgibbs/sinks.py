"""Sample sinks and the empirical distributions they produce.

All sinks reduce to two kernel-side primitives: exact count tables over
variable subsets (the joint histogram is the subset of all variables, an
event counter is a subset table plus a predicate mask) and an optional
thinned trace of full states.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError
from .graph import MAX_MARGINAL_SUBSET, FactorGraph, all_states, c_strides, marginalize_table

MODES = ("joint-histogram", "marginal-accumulator", "event-counter", "thinned-trace")
JOINT_HISTOGRAM_CAP = 2**22


def default_burn_in(steps: int) -> int:
    return max(1000, steps // 100)


@dataclass
class SampleSink:
    mode: str = "joint-histogram"
    subsets: list = field(default_factory=list)
    predicate: Callable | None = None
    stride: int = 1
    burn_in: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown sink mode {self.mode!r}")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")

    @classmethod
    def joint(cls, burn_in=None):
        return cls("joint-histogram", burn_in=burn_in)

    @classmethod
    def marginals(cls, subsets, burn_in=None):
        return cls("marginal-accumulator", subsets=[tuple(s) for s in subsets], burn_in=burn_in)

    @classmethod
    def event(cls, variables, predicate, burn_in=None):
        """Count post-burn-in states where ``predicate(values of variables)`` is true."""
        return cls("event-counter", subsets=[tuple(variables)], predicate=predicate, burn_in=burn_in)

    @classmethod
    def trace(cls, stride=1, burn_in=None):
        return cls("thinned-trace", stride=stride, burn_in=burn_in)

    def resolved_burn_in(self, steps: int) -> int:
        b = default_burn_in(steps) if self.burn_in is None else int(self.burn_in)
        return min(max(b, 0), steps)

    def table_subsets(self, graph: FactorGraph) -> list[tuple[int, ...]]:
        if self.mode == "joint-histogram":
            if graph.num_states > JOINT_HISTOGRAM_CAP:
                raise ConfigError("joint histogram too large; use marginal-accumulator")
            return [tuple(range(graph.n))]
        if self.mode == "thinned-trace":
            return []
        for s in self.subsets:
            if len(s) > MAX_MARGINAL_SUBSET or any(not 0 <= v < graph.n for v in s):
                raise ConfigError(f"invalid sink subset {s}")
        return list(self.subsets)

    def allocate(self, graph: FactorGraph, steps: int, copies: int = 1) -> "SinkBuffers":
        subsets = self.table_subsets(graph)
        ptr, vars_, strides, cptr = [0], [], [], [0]
        for s in subsets:
            dims = [int(graph.domain_sizes[v]) for v in s]
            vars_.extend(s)
            strides.extend(c_strides(dims))
            ptr.append(len(vars_))
            cptr.append(cptr[-1] + int(np.prod(dims, dtype=np.int64)))
        burn = self.resolved_burn_in(steps)
        if self.mode == "thinned-trace":
            rows = max((steps - burn + self.stride - 1) // self.stride, 0)
            trace = np.zeros((copies, rows, graph.n), dtype=np.int8 if graph.domain_sizes.max() < 128 else np.int64)
        else:
            trace = np.zeros((copies, 0, graph.n), dtype=np.int8)
        return SinkBuffers(
            sub_ptr=np.asarray(ptr, dtype=np.int64),
            sub_vars=np.asarray(vars_, dtype=np.int64),
            sub_stride=np.asarray(strides, dtype=np.int64),
            count_ptr=np.asarray(cptr, dtype=np.int64),
            counts=np.zeros((copies, cptr[-1]), dtype=np.int64),
            trace=trace,
            stride=int(self.stride),
            burn_in=burn,
        )

    def finalize(self, graph: FactorGraph, buf: "SinkBuffers", meta: dict) -> "EmpiricalDistribution":
        counts = buf.counts.sum(axis=0)
        subsets = self.table_subsets(graph)
        tables = {}
        for k, s in enumerate(subsets):
            dims = tuple(int(graph.domain_sizes[v]) for v in s)
            tables[s] = counts[buf.count_ptr[k]:buf.count_ptr[k + 1]].reshape(dims).copy()
        trace = buf.trace.reshape(-1, graph.n) if buf.trace.shape[1] else None
        total = int(next(iter(tables.values())).sum()) if tables else (0 if trace is None else len(trace))
        event_count = None
        if self.mode == "event-counter":
            (s, tab), = tables.items()
            vals = all_states(tab.shape)
            mask = np.array([bool(self.predicate(row)) for row in vals]).reshape(tab.shape)
            event_count = int(tab[mask].sum())
        meta = dict(meta)
        meta.setdefault("burn_in", buf.burn_in)
        meta["sink"] = self.mode
        return EmpiricalDistribution(tables, total, tuple(int(d) for d in graph.domain_sizes),
                                     trace=trace, event_count=event_count, meta=meta)


class SinkBuffers(NamedTuple):
    sub_ptr: np.ndarray
    sub_vars: np.ndarray
    sub_stride: np.ndarray
    count_ptr: np.ndarray
    counts: np.ndarray      # (copies, total cells)
    trace: np.ndarray       # (copies, rows, n)
    stride: int
    burn_in: int


class EmpiricalDistribution:
    """Exact sample counts over one or more variable subsets."""

    def __init__(self, tables: dict, total: int, domain_sizes: Sequence[int], trace=None,
                 event_count: int | None = None, meta: dict | None = None):
        self.tables = {tuple(k): np.asarray(v) for k, v in tables.items()}
        self.total = int(total)
        self.domain_sizes = tuple(domain_sizes)
        self.trace = trace
        self.event_count = event_count
        self.meta = dict(meta or {})

    @property
    def n(self) -> int:
        return len(self.domain_sizes)

    @property
    def counts(self) -> np.ndarray:
        """Counts of the first recorded table (the joint for joint-histogram sinks)."""
        if self.tables:
            return next(iter(self.tables.values()))
        return self.marginal_counts(tuple(range(self.n)))

    @property
    def probabilities(self) -> np.ndarray:
        c = self.counts
        return c / c.sum()

    @property
    def event_probability(self) -> float:
        if self.event_count is None:
            raise ConfigError("not an event-counter sink")
        return self.event_count / self.total

    def marginal_counts(self, subset: Sequence[int]) -> np.ndarray:
        subset = tuple(subset)
        for vars_, tab in self.tables.items():
            if set(subset) <= set(vars_):
                return marginalize_table(tab, vars_, subset)
        if self.trace is not None:
            dims = tuple(self.domain_sizes[v] for v in subset)
            idx = np.ravel_multi_index(tuple(self.trace[:, list(subset)].T.astype(np.int64)), dims) if subset else np.zeros(len(self.trace), dtype=np.int64)
            return np.bincount(idx, minlength=int(np.prod(dims))).reshape(dims)
        raise ConfigError(f"subset {subset} was not recorded by this sink")

    def merged(self, other: "EmpiricalDistribution") -> "EmpiricalDistribution":
        if self.tables.keys() != other.tables.keys():
            raise ConfigError("cannot merge sinks with different subsets")
        tables = {k: self.tables[k] + other.tables[k] for k in self.tables}
        trace = None
        if self.trace is not None and other.trace is not None:
            trace = np.concatenate([self.trace, other.trace])
        ev = None if self.event_count is None else self.event_count + other.event_count
        return EmpiricalDistribution(tables, self.total + other.total, self.domain_sizes, trace, ev, self.meta)

    # -- serialization ------------------------------------------------------

    def rows(self):
        for vars_, tab in self.tables.items():
            total = tab.sum()
            for idx in np.ndindex(tab.shape):
                label = "vars=" + "".join(map(str, vars_)) + ":" + "".join(map(str, idx)) if len(self.tables) > 1 \
                    else "(" + ",".join(map(str, idx)) + ")"
                c = int(tab[idx])
                yield label, c, (c / total if total else 0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        header = {"meta": self.meta, "columns": {"state": "str", "count": "int", "probability": "float"}}
        buf.write("# " + json.dumps(header, sort_keys=True, default=str) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["state", "count", "probability"])
        for label, c, p in self.rows():
            w.writerow([label, c, repr(float(p))])
        if self.event_count is not None:
            w.writerow(["event", self.event_count, repr(self.event_probability)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "meta": self.meta,
            "total": self.total,
            "tables": [{"variables": list(k), "counts": v.ravel().tolist(), "shape": list(v.shape)}
                       for k, v in self.tables.items()],
            "event_count": self.event_count,
        }
