import json
import math
import subprocess
import sys

import pytest

from asyncgibbs.cli import EXIT_CONFIG, EXIT_GUARD, EXIT_OK, main
from asyncgibbs.errors import ConfigError
from asyncgibbs.experiments import ExperimentConfig, read_result_csv, run_experiment

SMALL = {
    "bias": {"steps": 20_000},
    "badmix": {"N": 11, "steps": 4000, "trials": 5, "every": 1000},
    "tausweep": {"n": 60, "grid": [0, 20], "support_max": 20, "trials": 100},
    "influence-report": {"model": {"kind": "random_ising", "n": 8, "degree": 3, "beta": 0.2}},
    "bounds-table": {"n": 1000, "alpha": 0.6, "tau_star": 0.0, "epsilon": 0.25},
}
TYPES = {"int": int, "float": float, "str": str, "bool": bool}


def run(tmp_path, exp, params, *extra):
    cfg = tmp_path / f"{exp}.json"
    cfg.write_text(json.dumps(params))
    out = tmp_path / "out"
    rc = main([exp, "--config", str(cfg), "--out", str(out), *extra])
    return rc, out


@pytest.mark.parametrize("exp", sorted(SMALL))
def test_outputs_parse_against_header(tmp_path, exp):
    rc, out = run(tmp_path, exp, SMALL[exp], "--seed", "3")
    assert rc == EXIT_OK
    header, rows = read_result_csv((out / f"{exp}.csv").read_text())
    assert rows
    for r in rows:
        assert set(r) == set(header["columns"])
        for k, t in header["columns"].items():
            assert isinstance(r[k], TYPES[t])
    meta = json.loads((out / f"{exp}.meta.json").read_text())
    assert meta["config"]["seed"] == 3


@pytest.mark.parametrize("exp", sorted(SMALL))
def test_reruns_are_byte_identical(tmp_path, exp):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    _, a = run(tmp_path / "a", exp, SMALL[exp])
    _, b = run(tmp_path / "b", exp, SMALL[exp])
    assert (a / f"{exp}.csv").read_bytes() == (b / f"{exp}.csv").read_bytes()


def test_seed_changes_sampled_output(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    _, a = run(tmp_path / "a", "bias", SMALL["bias"], "--seed", "1")
    _, b = run(tmp_path / "b", "bias", SMALL["bias"], "--seed", "2")
    assert (a / "bias.csv").read_text() != (b / "bias.csv").read_text()


def test_config_errors(tmp_path):
    assert run(tmp_path, "bias", {"bogus": 1})[0] == EXIT_CONFIG
    assert run(tmp_path, "badmix", {"N": 10})[0] == EXIT_CONFIG
    assert run(tmp_path, "bias", {"delay": {"kind": "constant"}})[0] == EXIT_CONFIG
    assert run(tmp_path, "bias", {"experiment": "badmix"})[0] == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2")
    assert main(["bias", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["bias", "--seed", "-4", "--out", str(tmp_path)]) == EXIT_CONFIG
    with pytest.raises(SystemExit):
        main(["nonexistent"])


def test_strict_mode(tmp_path):
    params = {"alpha": 1.2}
    rc, out = run(tmp_path, "bounds-table", params)
    assert rc == EXIT_OK
    rc, out = run(tmp_path, "bounds-table", params, "--strict")
    assert rc == EXIT_GUARD
    _, rows = read_result_csv((out / "bounds-table.csv").read_text())
    flagged = {r["bound_name"]: r["violation"] for r in rows if not r["guard_satisfied"]}
    assert flagged["mixing_sequential"] == "DobrushinViolated"
    assert flagged["mixing_hogwild"] == "DobrushinViolated"
    rc, _ = run(tmp_path, "influence-report",
                {"model": {"kind": "random_ising", "n": 8, "degree": 3, "beta": 1.0}}, "--strict")
    assert rc == EXIT_GUARD


def test_bounds_table_values():
    res = run_experiment(ExperimentConfig("bounds-table", {"n": 1000, "alpha": 0.6, "tau_star": 0.0,
                                                           "epsilon": 0.25}))
    vals = {r[0]: r[1] for r in res.rows}
    assert vals["mixing_sequential"] == pytest.approx(2500 * math.log(4000), rel=1e-12)
    res = run_experiment(ExperimentConfig("bounds-table", {"ising": {"degree": 3, "beta": 0.2},
                                                           "tau_star": 200.0}))
    vals = {r[0]: r[1] for r in res.rows}
    a = 3 * math.tanh(0.2)
    assert vals["mixing_hogwild"] == pytest.approx((1000 + 200 * a) / (1 - a) * math.log(4000), rel=1e-12)


def test_bias_summary_fields():
    res = run_experiment(ExperimentConfig("bias", {"steps": 200_000}, seed=1))
    s = res.summary
    assert s["tv_hogwild"] >= 5 * s["sv1_hogwild"]
    assert s["chi2_hogwild_vs_oracle"]["pvalue"] > 0.001
    assert s["chi2_sequential"]["pvalue"] > 0.001
    assert s["oracle_mass_00"] == pytest.approx(1 / 45, abs=1e-12)
    rows = {r[0]: r for r in res.rows}
    assert rows["(0,0)"][3] > 0.02


def test_paper_scale_resolution():
    cfg = ExperimentConfig("badmix", paper_scale=True)
    assert cfg.resolved()["N"] == 2001 and cfg.resolved()["trials"] == 10_000
    assert ExperimentConfig("tausweep", paper_scale=True).resolved()["trials"] == 10_000
    assert ExperimentConfig("badmix", {"trials": 7}, paper_scale=True).resolved()["trials"] == 7
    cfg = ExperimentConfig.from_dict({"experiment": "bias", "seed": 5, "steps": 10})
    assert cfg.seed == 5 and cfg.resolved()["steps"] == 10
    with pytest.raises(ConfigError):
        ExperimentConfig("bogus")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"steps": 10})


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "asyncgibbs.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "--paper-scale" in r.stdout
