"""Compiled per-pattern loops (numba).

Every kernel works on a chunk of a bag: ``normals`` holds one row of
pre-drawn standard-normal deviates per pattern, outputs are padded with 0.
The float expressions are written in the same order as in
``_numpy_kernels`` so both backends round identically.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _round_half_away(v):
    a = abs(v)
    r = math.floor(a)
    if a - r >= 0.5:
        r += 1.0
    r = np.int64(r)
    return r if v >= 0 else -r


@njit(cache=True, nogil=True)
def angie(k_grid, k_req, k_min, k_max, sigma, uniforms, normals):
    n = uniforms.shape[0]
    out = np.zeros((n, k_req), dtype=np.int64)
    for i in range(n):
        prev = 0
        lo = 1
        hi = k_grid - k_min * (k_req - 1)
        for k in range(k_req):
            left = k_req - k
            rem = k_grid - prev
            den = left + 1
            step = (2 * rem + den) // (2 * den)
            e = prev + step
            if k == 0:
                pt = np.int64(math.ceil(uniforms[i] * step))
            else:
                nd = min(abs(e - lo), abs(hi - e))
                pt = e + _round_half_away((sigma * normals[i, k]) * nd)
            if pt > hi:
                pt = hi
            elif pt < lo:
                pt = lo
            out[i, k] = pt
            prev = pt
            lo = pt + k_min
            hi = min(k_grid - k_min * (left - 2), pt + k_max)
    return out


@njit(cache=True, inline="always")
def _sort_dedupe(buf, m, out_row):
    s = np.sort(buf[:m])
    c = 0
    for j in range(m):
        if c == 0 or s[j] != out_row[c - 1]:
            out_row[c] = s[j]
            c += 1
    return c


@njit(cache=True, nogil=True)
def jittered(k_grid, k_req, n_avg, scale, normals):
    n = normals.shape[0]
    out = np.zeros((n, k_req), dtype=np.int64)
    lengths = np.zeros(n, dtype=np.int64)
    buf = np.empty(k_req, dtype=np.int64)
    for i in range(n):
        m = 0
        for k in range(1, k_req + 1):
            pt = _round_half_away(np.float64(k * n_avg) + (scale * normals[i, k - 1]) * n_avg)
            if pt >= 1 and pt <= k_grid:
                buf[m] = pt
                m += 1
        lengths[i] = _sort_dedupe(buf, m, out[i])
    return out, lengths


@njit(cache=True, nogil=True)
def additive(k_grid, k_req, n_avg, scale, normals):
    n = normals.shape[0]
    out = np.zeros((n, k_req), dtype=np.int64)
    lengths = np.zeros(n, dtype=np.int64)
    buf = np.empty(k_req, dtype=np.int64)
    for i in range(n):
        m = 0
        prev = 0
        for k in range(k_req):
            pt = _round_half_away(np.float64(prev + n_avg) + (scale * normals[i, k]) * n_avg)
            if pt >= 1 and pt <= k_grid:
                buf[m] = pt
                m += 1
                prev = pt
        lengths[i] = _sort_dedupe(buf, m, out[i])
    return out, lengths


@njit(cache=True, nogil=True)
def interval_counts(indices, lengths, k_min, k_max):
    n = indices.shape[0]
    under = np.zeros(n, dtype=np.int64)
    over = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(lengths[i] - 1):
            d = indices[i, j + 1] - indices[i, j]
            if d < k_min:
                under[i] += 1
            if d > k_max:
                over[i] += 1
    return under, over


@njit(cache=True, nogil=True)
def grid_hits(indices, lengths, rows, k_grid):
    hits = np.zeros(k_grid + 1, dtype=np.int64)
    for i in range(indices.shape[0]):
        if rows[i]:
            for j in range(lengths[i]):
                hits[indices[i, j]] += 1
    return hits[1:]


@njit(cache=True, nogil=True)
def driver_trace(indices, clock_div):
    count = indices.shape[0]
    events = np.empty(count, dtype=np.int64)
    if count == 0:
        return events
    last = indices[count - 1] * clock_div
    grid = 0
    ptr = 0
    cycle = 0
    while ptr < count and cycle <= last:
        # grid counter advances on every clock_div-th input edge
        if cycle > 0 and cycle % clock_div == 0:
            grid += 1
            if grid == indices[ptr]:
                events[ptr] = cycle
                ptr += 1
        cycle += 1
    return events[:ptr]
