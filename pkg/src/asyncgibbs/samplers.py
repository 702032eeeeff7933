"""Sequential, simulated-asynchronous and truly parallel Gibbs samplers."""
from __future__ import annotations

import threading
import time
from typing import NamedTuple

import numpy as np

from .delays import DelayModel
from .errors import ConfigError
from .graph import FactorGraph, conditional_distribution
from .history import StateHistory
from .kernels import (MODE_IID_DELAY, MODE_SEQUENTIAL, MODE_TWO_THREAD, gibbs_chain,
                      shared_state_worker)
from .rng import RngStream, next_below, next_double, sample_cdf
from .sinks import EmpiricalDistribution, SampleSink

DELAY_TAG = 0xD1
WORKER_TAG = 0x57


def delay_stream(rng: RngStream) -> RngStream:
    return rng.substream(DELAY_TAG)


def worker_stream(rng: RngStream, w: int) -> RngStream:
    # worker 0 shares the sequential stream so one worker reproduces run_sequential
    return rng if w == 0 else rng.substream(WORKER_TAG, w)


class ParallelRun(NamedTuple):
    distribution: EmpiricalDistribution
    throughput: float          # updates per second
    elapsed: float
    state_bytes: int           # bytes of model state allocated across workers


def _initial(graph: FactorGraph, initial) -> np.ndarray:
    if initial is None:
        return np.zeros(graph.n, dtype=np.int64)
    return graph.validate_state(initial).copy()


def _async_vars(graph: FactorGraph, delay: DelayModel) -> np.ndarray:
    av = delay.params.get("async_vars")
    if av is None:
        return np.arange(graph.n, dtype=np.int64)
    return np.asarray(sorted(set(int(v) for v in av)), dtype=np.int64)


def _run_chain(graph, steps, initial, rng, sink, mode, delay: DelayModel | None):
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    sink = sink or SampleSink.joint()
    x = _initial(graph, initial)
    delay = delay or DelayModel.zero(graph.n)
    async_list = _async_vars(graph, delay) if mode == MODE_TWO_THREAD else np.zeros(0, dtype=np.int64)
    async_mask = np.zeros(graph.n, dtype=np.bool_)
    async_mask[async_list] = True
    buf = sink.allocate(graph, steps)
    meta = {"rng": rng.describe(), "steps": steps, "delay_model": delay.describe(),
            "initial": x.tolist()}
    if graph.all_tables:
        gibbs_chain(graph.compiled(), x, steps, rng.state(), delay_stream(rng).state(), mode,
                    delay.cdf, async_mask, async_list,
                    buf.sub_ptr, buf.sub_vars, buf.sub_stride, buf.count_ptr, buf.counts[0],
                    buf.trace[0], buf.stride, buf.burn_in)
    else:
        _python_chain(graph, x, steps, rng, mode, delay, async_mask, async_list, buf)
    meta["final_state"] = x.tolist()
    return sink.finalize(graph, buf, meta)


def _python_chain(graph, x, steps, rng, mode, delay, async_mask, async_list, buf):
    """Reference loop for graphs with callback factors (same draw order as the kernel)."""
    from .kernels import _emit

    st, dst = rng.state(), delay_stream(rng).state()
    cdf = delay.cdf
    hist = StateHistory(x, delay.support_max)
    n = graph.n

    def emit(t):
        _emit(hist.x, t, buf.burn_in, buf.sub_ptr, buf.sub_vars, buf.sub_stride, buf.count_ptr,
              buf.counts[0], buf.trace[0], buf.stride)

    def draw(p):
        u = next_double(st)
        return min(int(np.searchsorted(np.cumsum(p), u * p.sum(), side="right")), len(p) - 1)

    while hist.t < steps:
        i = next_below(st, n)
        if mode == MODE_IID_DELAY:
            view = hist.x.copy()
            for j in graph.blanket[i]:
                d = min(int(sample_cdf(dst, cdf)), hist.t)
                view[j] = hist.read(j, d)
            hist.write(i, draw(conditional_distribution(graph, view, i)))
            emit(hist.t)
        elif mode == MODE_TWO_THREAD and async_mask[i] and len(async_list) >= 2:
            j = i
            while j == i:
                j = int(async_list[next_below(st, len(async_list))])
            snap = hist.x.copy()
            z_i = draw(conditional_distribution(graph, snap, i))
            z_j = draw(conditional_distribution(graph, snap, j))
            hist.write(i, z_i)
            emit(hist.t)
            if hist.t < steps:
                hist.write(j, z_j)
                emit(hist.t)
        else:
            hist.write(i, draw(conditional_distribution(graph, hist.x, i)))
            emit(hist.t)
    x[:] = hist.x


def run_sequential(graph: FactorGraph, steps: int, initial=None, rng: RngStream | None = None,
                   sink: SampleSink | None = None) -> EmpiricalDistribution:
    """Random-scan Gibbs: pick a variable uniformly, resample it from its conditional."""
    return _run_chain(graph, steps, initial, rng or RngStream(0), sink, MODE_SEQUENTIAL, None)


def run_hogwild_simulated(graph: FactorGraph, steps: int, initial=None,
                          delay_model: DelayModel | None = None, rng: RngStream | None = None,
                          sink: SampleSink | None = None) -> EmpiricalDistribution:
    """Asynchronous Gibbs with stale reads drawn from ``delay_model``.

    For i.i.d. laws each Markov-blanket read of the chosen variable gets its
    own delay, clamped to the current write time.  The two-thread pattern
    updates pairs of async variables from one shared snapshot.
    """
    delay_model = delay_model or DelayModel.zero(graph.n)
    mode = MODE_TWO_THREAD if delay_model.is_pattern else MODE_IID_DELAY
    return _run_chain(graph, steps, initial, rng or RngStream(0), sink, mode, delay_model)


def _split(total: int, parts: int) -> list[int]:
    q, r = divmod(total, parts)
    return [q + (1 if w < r else 0) for w in range(parts)]


def _run_threads(graph, states, quotas, burns, rng, sink, buf):
    g = graph.compiled()
    workers = len(quotas)
    rngs = [worker_stream(rng, w).state() for w in range(workers)]
    # compile outside the timed region
    shared_state_worker(g, states[0].copy(), 0, rngs[0].copy(), 0, buf.sub_ptr, buf.sub_vars,
                        buf.sub_stride, buf.count_ptr, buf.counts[0].copy(), buf.trace[0], buf.stride)
    threads = [
        threading.Thread(target=shared_state_worker,
                         args=(g, states[w], quotas[w], rngs[w], burns[w], buf.sub_ptr, buf.sub_vars,
                               buf.sub_stride, buf.count_ptr, buf.counts[w], buf.trace[w], buf.stride))
        for w in range(workers)
    ]
    t0 = time.perf_counter()
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    return time.perf_counter() - t0


def run_hogwild_parallel(graph: FactorGraph, total_steps: int, initial=None, workers: int = 1,
                         sink: SampleSink | None = None, rng: RngStream | None = None) -> ParallelRun:
    """Lock-free Gibbs: ``workers`` OS threads update one shared state array.

    The jitted worker releases the GIL, so threads run truly concurrently on
    multi-core hardware.  Results are nondeterministic whenever workers > 1.
    """
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    if total_steps < 1:
        raise ConfigError("total_steps must be >= 1")
    sink = sink or SampleSink.joint()
    rng = rng or RngStream(0)
    shared = _initial(graph, initial)
    quotas = _split(total_steps, workers)
    burn = sink.resolved_burn_in(total_steps)
    burns = _split(burn, workers)
    buf = sink.allocate(graph, max(quotas), copies=workers)
    buf = buf._replace(burn_in=burn)
    elapsed = _run_threads(graph, [shared] * workers, quotas, burns, rng, sink, buf)
    meta = {"rng": rng.describe(), "steps": total_steps, "workers": workers, "mode": "hogwild",
            "elapsed": elapsed, "throughput": total_steps / elapsed}
    dist = sink.finalize(graph, buf, meta)
    return ParallelRun(dist, total_steps / elapsed, elapsed, shared.nbytes)


def run_multimodel(graph: FactorGraph, total_steps: int, workers: int = 1, sink: SampleSink | None = None,
                   initial=None, rng: RngStream | None = None) -> ParallelRun:
    """Independent chains, one private state copy per worker thread."""
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    sink = sink or SampleSink.joint()
    rng = rng or RngStream(0)
    x0 = _initial(graph, initial)
    quotas = _split(total_steps, workers)
    states = [x0.copy() for _ in range(workers)]
    burns = [sink.resolved_burn_in(q) if sink.burn_in is None else min(int(sink.burn_in), q) for q in quotas]
    if workers == 1:
        burns = [sink.resolved_burn_in(total_steps)]
    buf = sink.allocate(graph, max(quotas), copies=workers)
    elapsed = _run_threads(graph, states, quotas, burns, rng, sink, buf)
    meta = {"rng": rng.describe(), "steps": total_steps, "workers": workers, "mode": "multimodel",
            "elapsed": elapsed, "throughput": total_steps / elapsed, "burn_in_per_worker": burns}
    dist = sink.finalize(graph, buf, meta)
    return ParallelRun(dist, total_steps / elapsed, elapsed, sum(s.nbytes for s in states))
