import csv
import io
import json

import numpy as np
import pytest

from asyncgibbs.errors import ConfigError
from asyncgibbs.models import build_bias_example
from asyncgibbs.rng import RngStream
from asyncgibbs.samplers import run_sequential
from asyncgibbs.sinks import SampleSink, default_burn_in


def parse(text):
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    header = json.loads(lines[0][2:])
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    return header, rows


def test_default_burn_in():
    assert default_burn_in(10) == 1000
    assert default_burn_in(10**6) == 10**4


def test_joint_csv_round_trip():
    g = build_bias_example()
    e = run_sequential(g, 50_000, [1, 1], RngStream(0))
    header, rows = parse(e.to_csv())
    assert set(header["columns"]) == {"state", "count", "probability"}
    assert [r["state"] for r in rows] == ["(0,0)", "(0,1)", "(1,0)", "(1,1)"]
    counts = np.array([int(r["count"]) for r in rows])
    np.testing.assert_array_equal(counts, e.counts.ravel())
    np.testing.assert_allclose([float(r["probability"]) for r in rows], e.probabilities.ravel())


def test_event_sink_csv_and_json():
    g = build_bias_example()
    e = run_sequential(g, 20_000, [1, 1], RngStream(1), SampleSink.event([0], lambda v: v[0] == 1))
    _, rows = parse(e.to_csv())
    assert rows[-1]["state"] == "event"
    assert int(rows[-1]["count"]) == e.event_count
    assert 0.5 < e.event_probability < 0.8
    assert json.loads(json.dumps(e.to_json()))["total"] == e.total


def test_merged_adds_counts():
    g = build_bias_example()
    a = run_sequential(g, 10_000, [1, 1], RngStream(1))
    b = run_sequential(g, 10_000, [1, 1], RngStream(2))
    m = a.merged(b)
    np.testing.assert_array_equal(m.counts, a.counts + b.counts)
    assert m.total == a.total + b.total
    other = run_sequential(g, 10_000, [1, 1], RngStream(2), SampleSink.marginals([(0,)]))
    with pytest.raises(ConfigError):
        a.merged(other)


def test_sink_errors():
    g = build_bias_example()
    e = run_sequential(g, 5_000, [1, 1], RngStream(1), SampleSink.marginals([(0,)]))
    with pytest.raises(ConfigError):
        e.marginal_counts([1])
    with pytest.raises(ConfigError):
        _ = e.event_probability
    with pytest.raises(ConfigError):
        SampleSink.trace(stride=0)
    with pytest.raises(ConfigError):
        run_sequential(g, 100, None, RngStream(0), SampleSink.marginals([(5,)]))
