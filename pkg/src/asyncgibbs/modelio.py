"""JSON model format.

    {"variables": [{"id": 0, "domain_size": 2}, ...],
     "factors": [{"scope": [0, 1], "table": [[...], ...]}
                 | {"scope": [...], "builtin": "ising_edge", "params": {...}}]}

Factors built by a registered constructor are written by name, so callback
factors with large scopes stay serializable.  Floats are written with
``repr`` precision, which makes the round trip bit-exact.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .graph import Factor, FactorGraph, VariableSpec
from .models import BUILTINS, builtin_factor


def model_to_dict(graph: FactorGraph) -> dict:
    factors = []
    for f in graph.factors:
        if f.builtin in BUILTINS:
            factors.append({"scope": list(f.scope), "builtin": f.builtin, "params": dict(f.params)})
        elif f.is_table:
            factors.append({"scope": list(f.scope), "table": f.table.tolist()})
        else:
            raise ConfigError("custom callback factors cannot be serialized; register a builtin")
    d = {"variables": [{"id": v.id, "domain_size": v.domain_size} for v in graph.variables],
         "factors": factors}
    if graph.meta:
        d["meta"] = graph.meta
    return d


def model_from_dict(d: dict) -> FactorGraph:
    try:
        variables = [VariableSpec(int(v["id"]), int(v["domain_size"])) for v in d["variables"]]
        factors = []
        for f in d.get("factors", []):
            if "builtin" in f:
                factors.append(builtin_factor(f["builtin"], f["scope"], f.get("params", {})))
            elif "table" in f:
                factors.append(Factor(f["scope"], table=np.asarray(f["table"], dtype=np.float64)))
            else:
                raise ConfigError("factor needs 'table' or 'builtin'")
    except (KeyError, TypeError) as e:
        raise ConfigError(f"malformed model JSON: {e}") from None
    return FactorGraph(variables, factors, meta=d.get("meta"))


def save_model(graph: FactorGraph, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(graph), indent=1, sort_keys=True, default=str))


def load_model(path) -> FactorGraph:
    try:
        return model_from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
