"""Experiment drivers behind the command-line tool.

Each ``cmd_*`` takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentResult` (a CSV table plus a JSON summary).  Everything
except ``throughput`` is a pure function of the config and seed.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .badmix import run_badmix
from .bounds import BOUNDS, BoundInputs, evaluate
from .coupling import SWEEP_COLUMNS, IsingParams, ising_params, tau_sweep
from .delays import DelayModel
from .distances import sparse_variation_distance, tv_distance
from .errors import ConfigError, NonFerromagnetic
from .graph import all_states, exact_distribution
from .influence import INFLUENCE_CAP, InfluenceReport, ising_influence_bound, total_influence_exact
from .modelio import load_model, model_from_dict
from .models import BADMIX_M1, build_badmix_model, build_bias_example, build_ising, build_random_ising
from .oracles import delayed_oracle, markov_chi2, sequential_oracle, two_thread_oracle
from .rng import RngStream
from .samplers import run_hogwild_parallel, run_hogwild_simulated, run_multimodel, run_sequential
from .sinks import SampleSink

EXPERIMENTS = ("bias", "badmix", "tausweep", "throughput", "influence-report", "bounds-table")

DEFAULTS = {
    "bias": {"steps": 1_000_000, "penalty": 40.0, "initial": [1, 1], "burn_in": None,
             "delay": {"kind": "iid-bernoulli", "rho": 0.5, "k": 1}},
    "badmix": {"N": 201, "beta": 0.3, "M1": BADMIX_M1, "M2": 100.0, "steps": 500_000,
               "trials": 200, "every": 1000},
    "tausweep": {"n": 1000, "degree": 3, "beta": 0.2, "grid": [0, 50, 100, 150, 200],
                 "support_max": 200, "trials": 1000, "epsilon": 0.25},
    "throughput": {"n": 1_000_000, "degree": 3, "beta": 0.2, "workers": [1, 2, 4, 8],
                   "updates_per_worker": 5_000_000},
    "influence-report": {"model": {"kind": "bias_example"}, "cap": INFLUENCE_CAP},
    "bounds-table": {"n": 1000, "alpha": 0.6, "tau": 1.0, "tau_star": 0.0, "omega": 1,
                     "epsilon": 0.25, "t": 1000.0, "ising": None},
}

PAPER_SCALE = {
    "badmix": {"N": 2001, "trials": 10_000},
    "tausweep": {"trials": 10_000},
}

# stream ids keep the experiments' randomness disjoint under one master seed
STREAMS = {"bias-seq": 0, "bias-hog": 1, "graph": 10, "coupling": 11, "badmix": 20, "throughput": 30}


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    strict: bool = False
    paper_scale: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        unknown = set(self.params) - set(DEFAULTS[self.experiment])
        if unknown:
            raise ConfigError(f"unknown parameters for {self.experiment}: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d: dict, experiment: str | None = None) -> "ExperimentConfig":
        d = dict(d)
        exp = d.pop("experiment", experiment)
        if experiment is not None and exp != experiment:
            raise ConfigError(f"config is for {exp!r}, not {experiment!r}")
        if exp is None:
            raise ConfigError("config does not name an experiment")
        params = dict(d.pop("params", {}))
        seed = d.pop("seed", 0)
        strict = bool(d.pop("strict", False))
        paper = bool(d.pop("paper_scale", False))
        params.update(d)  # remaining top-level keys are parameters too
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        return cls(exp, params, seed, strict, paper)

    @classmethod
    def load(cls, path, experiment: str | None = None) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d, experiment)

    def resolved(self) -> dict:
        p = dict(DEFAULTS[self.experiment])
        if self.paper_scale:
            p.update(PAPER_SCALE.get(self.experiment, {}))
        p.update(self.params)
        return p

    def rng(self, stream: str) -> RngStream:
        return RngStream(self.seed, STREAMS[stream])

    def to_json(self) -> dict:
        return {"experiment": self.experiment, "params": self.resolved(), "seed": self.seed,
                "strict": self.strict, "paper_scale": self.paper_scale}


@dataclass
class ExperimentResult:
    experiment: str
    columns: list            # [(name, type)] with type in {"int", "float", "str", "bool"}
    rows: list
    summary: dict
    guard_violations: list = field(default_factory=list)

    def to_csv(self, config: ExperimentConfig | None = None) -> str:
        buf = io.StringIO()
        header = {"experiment": self.experiment, "columns": dict(self.columns)}
        if config is not None:
            header["config"] = config.to_json()
        buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([c for c, _ in self.columns])
        for row in self.rows:
            w.writerow([repr(float(v)) if t == "float" else v for v, (_, t) in zip(row, self.columns)])
        return buf.getvalue()


def read_result_csv(text: str) -> tuple[dict, list[dict]]:
    """Parse a CSV written by :meth:`ExperimentResult.to_csv`, applying the declared column types."""
    first, rest = text.split("\n", 1)
    if not first.startswith("# "):
        raise ConfigError("missing JSON header line")
    header = json.loads(first[2:])
    casts = {"int": int, "float": float, "str": str, "bool": lambda s: s == "True"}
    rows = []
    for r in csv.DictReader(io.StringIO(rest)):
        rows.append({k: casts[header["columns"][k]](v) for k, v in r.items()})
    return header, rows


def write_outputs(result: ExperimentResult, config: ExperimentConfig, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{result.experiment}.csv"
    meta_path = out / f"{result.experiment}.meta.json"
    csv_path.write_text(result.to_csv(config))
    meta = {"config": config.to_json(), "summary": result.summary,
            "guard_violations": result.guard_violations}
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")
    return csv_path, meta_path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


# -- model selection --------------------------------------------------------

def build_model(spec: dict, seed: int = 0):
    """Model from a small JSON description (used by influence-report)."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    try:
        if kind == "bias_example":
            return build_bias_example(**spec)
        if kind == "random_ising":
            return build_random_ising(spec["n"], spec["degree"], spec["beta"], spec.get("priors"),
                                      RngStream(seed, STREAMS["graph"]))
        if kind == "ising":
            return build_ising(spec["n"], spec["edges"], spec["beta"], spec.get("priors"))
        if kind == "badmix":
            return build_badmix_model(**spec)
        if kind == "file":
            return load_model(spec["path"])
        if kind == "inline":
            return model_from_dict(spec["model"])
    except (KeyError, TypeError) as e:
        raise ConfigError(f"model {kind!r}: missing or invalid field {e}") from None
    raise ConfigError(f"unknown model kind {kind!r}")


# -- commands ---------------------------------------------------------------

def cmd_bias(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.resolved()
    g = build_bias_example(p["penalty"])
    dm = DelayModel.from_dict(p["delay"], g.n)
    steps, init = int(p["steps"]), p["initial"]
    sink = SampleSink.joint(burn_in=p["burn_in"])
    seq = run_sequential(g, steps, init, cfg.rng("bias-seq"), sink)
    hog = run_hogwild_simulated(g, steps, init, dm, cfg.rng("bias-hog"), sink)
    pi = exact_distribution(g).probabilities.ravel()
    seq_oracle = sequential_oracle(g, init)
    hog_oracle = two_thread_oracle(g, dm.params.get("async_vars"), init) if dm.is_pattern \
        else delayed_oracle(g, dm, init)
    oracle = hog_oracle.recorded_stationary()
    fs, fh = seq.probabilities.ravel(), hog.probabilities.ravel()
    states = all_states(g.domain_sizes)
    rows = [["(" + ",".join(map(str, s)) + ")", pi[k], fs[k], fh[k], oracle[k],
             int(seq.counts.ravel()[k]), int(hog.counts.ravel()[k])] for k, s in enumerate(states)]
    chi_seq = markov_chi2(seq.counts, seq_oracle)
    chi_hog = markov_chi2(hog.counts, hog_oracle)
    summary = {
        "delay_model": dm.describe(),
        "steps": steps,
        "tv_sequential": tv_distance(fs, pi),
        "sv1_sequential": sparse_variation_distance(fs, pi, 1, g.n),
        "tv_hogwild": tv_distance(fh, pi),
        "sv1_hogwild": sparse_variation_distance(fh, pi, 1, g.n),
        "tv_hogwild_vs_sequential": tv_distance(fh, fs),
        "sv1_hogwild_vs_sequential": sparse_variation_distance(fh, fs, 1, g.n),
        "hogwild_mass_00": float(fh[0]),
        "oracle_mass_00": float(oracle[0]),
        "chi2_sequential": asdict(chi_seq),
        "chi2_hogwild_vs_oracle": asdict(chi_hog),
    }
    summary["tv_over_sv1_hogwild"] = summary["tv_hogwild"] / max(summary["sv1_hogwild"], 1e-300)
    cols = [("state", "str"), ("exact", "float"), ("sequential", "float"), ("hogwild", "float"),
            ("hogwild_oracle", "float"), ("sequential_count", "int"), ("hogwild_count", "int")]
    return ExperimentResult("bias", cols, rows, summary)


def cmd_badmix(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.resolved()
    rng = cfg.rng("badmix")
    kw = dict(N=int(p["N"]), beta=float(p["beta"]), steps=int(p["steps"]), trials=int(p["trials"]),
              rng=rng, every=int(p["every"]), M1=float(p["M1"]), M2=float(p["M2"]))
    seq = run_badmix(mode="sequential", **kw)
    hog = run_badmix(mode="two-thread-pattern", **kw)
    rows = [[int(s), float(a), float(b), 0.5]
            for s, a, b in zip(seq.steps, seq.fraction_positive, hog.fraction_positive)]
    summary = {"sequential_final": float(seq.fraction_positive[-1]),
               "hogwild_final": float(hog.fraction_positive[-1]),
               "hogwild_min": float(hog.fraction_positive.min()),
               "trials": int(p["trials"]), "N": int(p["N"])}
    cols = [("steps", "int"), ("sequential", "float"), ("hogwild", "float"), ("reference", "float")]
    return ExperimentResult("badmix", cols, rows, summary)


def cmd_tausweep(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.resolved()
    g = build_random_ising(int(p["n"]), int(p["degree"]), float(p["beta"]), rng=cfg.rng("graph"))
    table = tau_sweep(g, [float(x) for x in p["grid"]], int(p["support_max"]), int(p["trials"]),
                      cfg.rng("coupling"), float(p["epsilon"]))
    rows = [[getattr(r, c) for c in SWEEP_COLUMNS] for r in table]
    types = ["float", "int", "int", "int", "float", "int", "int"]
    summary = {"alpha_bound": ising_influence_bound(g.max_degree, float(p["beta"])),
               "t_hat": [r.t_hat for r in table],
               "endpoint_ratio": table[-1].t_hat / table[0].t_hat if table[0].t_hat else None}
    return ExperimentResult("tausweep", list(zip(SWEEP_COLUMNS, types)), rows, summary)


def cmd_throughput(cfg: ExperimentConfig) -> ExperimentResult:
    """Wall-clock updates/second; run on an otherwise idle machine."""
    p = cfg.resolved()
    g = build_random_ising(int(p["n"]), int(p["degree"]), float(p["beta"]), rng=cfg.rng("graph"))
    sink = SampleSink.marginals([(0,)], burn_in=0)
    rows = []
    for w in p["workers"]:
        total = int(p["updates_per_worker"]) * int(w)
        hog = run_hogwild_parallel(g, total, workers=int(w), sink=sink, rng=cfg.rng("throughput"))
        mm = run_multimodel(g, total, workers=int(w), sink=sink, rng=cfg.rng("throughput"))
        rows.append([int(w), hog.throughput, mm.throughput, hog.throughput / mm.throughput])
    base = rows[0][1]
    summary = {"hogwild_speedup": [r[1] / base for r in rows], "n": int(p["n"])}
    cols = [("workers", "int"), ("hogwild_updates_per_sec", "float"),
            ("multimodel_updates_per_sec", "float"), ("hogwild_over_multimodel", "float")]
    return ExperimentResult("throughput", cols, rows, summary)


def cmd_influence_report(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.resolved()
    g = build_model(p["model"], cfg.seed)
    reports = []
    rows = []
    if g.num_states <= int(p["cap"]):
        rep = total_influence_exact(g, int(p["cap"]))
        reports.append(rep)
        for i, j in zip(*np.nonzero(rep.per_variable_rows)):
            rows.append(["exact-enumeration", int(i), int(j), float(rep.per_variable_rows[i, j])])
    try:
        ip: IsingParams = ising_params(g)
        J = np.abs(ip.J)
        beta = float(J.max()) if len(J) else 0.0
        if len(J) == 0 or np.all(J == beta):
            reports.append(InfluenceReport(ising_influence_bound(g.max_degree, beta), "ising-closed-form",
                                           None, g.n))
    except NonFerromagnetic:
        pass
    if not reports:
        raise ConfigError("model is too large for enumeration and is not a uniform Ising model")
    violations = [f"{r.method}: alpha={r.alpha} >= 1" for r in reports if not r.dobrushin_satisfied]
    summary = {"reports": [r.to_json() for r in reports]}
    cols = [("method", "str"), ("target", "int"), ("source", "int"), ("influence", "float")]
    return ExperimentResult("influence-report", cols, rows, summary, violations)


def cmd_bounds_table(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.resolved()
    fields = {k: p[k] for k in ("n", "alpha", "tau", "tau_star", "omega", "epsilon", "t")}
    if p.get("ising"):
        ising = p["ising"]
        try:
            fields["alpha"] = ising_influence_bound(int(ising["degree"]), float(ising["beta"]))
        except (KeyError, TypeError) as e:
            raise ConfigError(f"ising preset needs degree and beta: {e}") from None
    try:
        inp = BoundInputs(**fields)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    results = [evaluate(name, inp) for name in BOUNDS]
    rows = [[r.bound_name, float("nan") if r.value is None else r.value, r.guard_satisfied,
             r.violation or ""] for r in results]
    violations = [f"{r.bound_name}: {r.violation}" for r in results if not r.guard_satisfied]
    summary = {"inputs": asdict(inp), "table": [r.to_json() for r in results]}
    cols = [("bound_name", "str"), ("value", "float"), ("guard_satisfied", "bool"), ("violation", "str")]
    return ExperimentResult("bounds-table", cols, rows, summary, violations)


COMMANDS = {
    "bias": cmd_bias,
    "badmix": cmd_badmix,
    "tausweep": cmd_tausweep,
    "throughput": cmd_throughput,
    "influence-report": cmd_influence_report,
    "bounds-table": cmd_bounds_table,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return COMMANDS[cfg.experiment](cfg)
