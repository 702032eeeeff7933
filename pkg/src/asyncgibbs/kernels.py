"""Jitted inner loops over a :class:`~asyncgibbs.graph.CompiledGraph`."""
from __future__ import annotations

import numpy as np
from numba import njit

from .history import history_read, history_write
from .rng import next_below, next_double, sample_cdf

MODE_SEQUENTIAL = 0
MODE_IID_DELAY = 1
MODE_TWO_THREAD = 2


@njit(nogil=True, cache=True)
def cond_logw(g, view, i, logw):
    """Unnormalized log-conditional of variable i; fills logw[:dom[i]]."""
    d = g.dom[i]
    for z in range(d):
        logw[z] = 0.0
    for k in range(g.vf_ptr[i], g.vf_ptr[i + 1]):
        f = g.vf[k]
        base = g.table_ptr[f]
        si = 0
        for p in range(g.scope_ptr[f], g.scope_ptr[f + 1]):
            v = g.scope[p]
            if v == i:
                si = g.stride[p]
            else:
                base += view[v] * g.stride[p]
        for z in range(d):
            logw[z] += g.tables[base + z * si]
    return d


@njit(nogil=True, cache=True)
def sample_logw(logw, d, u):
    m = logw[0]
    for z in range(1, d):
        if logw[z] > m:
            m = logw[z]
    tot = 0.0
    for z in range(d):
        tot += np.exp(logw[z] - m)
    target = u * tot
    acc = 0.0
    for z in range(d - 1):
        acc += np.exp(logw[z] - m)
        if target < acc:
            return z
    return d - 1


@njit(nogil=True, cache=True)
def record(x, sub_ptr, sub_vars, sub_stride, count_ptr, counts):
    for s in range(sub_ptr.shape[0] - 1):
        idx = 0
        for p in range(sub_ptr[s], sub_ptr[s + 1]):
            idx += x[sub_vars[p]] * sub_stride[p]
        counts[count_ptr[s] + idx] += 1


@njit(nogil=True, cache=True)
def _emit(x, t, burn, sub_ptr, sub_vars, sub_stride, count_ptr, counts, trace, stride):
    # t is the number of writes done; the state just produced is sample t-1
    k = t - 1 - burn
    if k < 0:
        return
    record(x, sub_ptr, sub_vars, sub_stride, count_ptr, counts)
    if trace.shape[0] > 0 and k % stride == 0:
        row = k // stride
        if row < trace.shape[0]:
            for v in range(x.shape[0]):
                trace[row, v] = x[v]


@njit(cache=True)
def gibbs_chain(g, x, steps, rng, drng, mode, cdf, async_mask, async_list,
                sub_ptr, sub_vars, sub_stride, count_ptr, counts, trace, stride, burn):
    """Single-threaded chain: sequential, i.i.d.-delay simulated async, or two-thread pattern.

    Selection and resampling draws always come from ``rng`` in the same
    order; delays come from ``drng``, so a zero-delay run reproduces the
    sequential chain exactly.
    """
    n = g.n
    R = cdf.shape[0]
    last_write = np.full(n, -1, dtype=np.int64)
    log_old = np.zeros(R, dtype=np.int64)
    log_prev = np.full(R, -1, dtype=np.int64)
    view = x.copy()
    logw = np.empty(g.max_dom)
    logw2 = np.empty(g.max_dom)
    n_async = async_list.shape[0]
    t = 0
    while t < steps:
        i = next_below(rng, n)
        if mode == MODE_IID_DELAY:
            for p in range(g.bl_ptr[i], g.bl_ptr[i + 1]):
                j = g.bl[p]
                d = sample_cdf(drng, cdf)
                if d > t:
                    d = t
                view[j] = history_read(x, last_write, log_old, log_prev, t, j, d)
            d_i = cond_logw(g, view, i, logw)
            z = sample_logw(logw, d_i, next_double(rng))
            t = history_write(x, last_write, log_old, log_prev, t, i, z)
            _emit(x, t, burn, sub_ptr, sub_vars, sub_stride, count_ptr, counts, trace, stride)
        elif mode == MODE_TWO_THREAD and async_mask[i] and n_async >= 2:
            j = i
            while j == i:
                j = async_list[next_below(rng, n_async)]
            d_i = cond_logw(g, x, i, logw)
            z_i = sample_logw(logw, d_i, next_double(rng))
            d_j = cond_logw(g, x, j, logw2)
            z_j = sample_logw(logw2, d_j, next_double(rng))
            x[i] = z_i
            t += 1
            _emit(x, t, burn, sub_ptr, sub_vars, sub_stride, count_ptr, counts, trace, stride)
            if t < steps:
                x[j] = z_j
                t += 1
                _emit(x, t, burn, sub_ptr, sub_vars, sub_stride, count_ptr, counts, trace, stride)
        else:
            d_i = cond_logw(g, x, i, logw)
            z = sample_logw(logw, d_i, next_double(rng))
            x[i] = z
            t += 1
            _emit(x, t, burn, sub_ptr, sub_vars, sub_stride, count_ptr, counts, trace, stride)
    return t


@njit(nogil=True, cache=True)
def shared_state_worker(g, x, quota, rng, burn,
                        sub_ptr, sub_vars, sub_stride, count_ptr, counts, trace, stride):
    """Lock-free worker loop over a (possibly shared) state array.

    Every slot is a machine word read and written individually; there is no
    snapshot across variables.  Used both for Hogwild threads (shared ``x``)
    and for multi-model threads (private ``x``).
    """
    n = g.n
    logw = np.empty(g.max_dom)
    for s in range(quota):
        i = next_below(rng, n)
        d_i = cond_logw(g, x, i, logw)
        x[i] = sample_logw(logw, d_i, next_double(rng))
        _emit(x, s + 1, burn, sub_ptr, sub_vars, sub_stride, count_ptr, counts, trace, stride)
    return quota
