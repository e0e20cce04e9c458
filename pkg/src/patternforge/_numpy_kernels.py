"""Pure-numpy kernels, vectorized across the patterns of a chunk.

Same signatures and bit-identical results as ``_jit_kernels``; the loops
over sampling points stay sequential but each step updates a whole column.
"""

import numpy as np

_SENTINEL = np.iinfo(np.int64).max


def _round_half_away(v):
    a = np.abs(v)
    r = np.floor(a)
    r = np.where(a - r >= 0.5, r + 1.0, r).astype(np.int64)
    return np.where(v >= 0, r, -r)


def angie(k_grid, k_req, k_min, k_max, sigma, uniforms, normals):
    n = uniforms.shape[0]
    out = np.zeros((n, k_req), dtype=np.int64)
    prev = np.zeros(n, dtype=np.int64)
    lo = np.ones(n, dtype=np.int64)
    hi = np.full(n, k_grid - k_min * (k_req - 1), dtype=np.int64)
    for k in range(k_req):
        left = k_req - k
        den = left + 1
        step = (2 * (k_grid - prev) + den) // (2 * den)
        e = prev + step
        if k == 0:
            pt = np.ceil(uniforms * step).astype(np.int64)
        else:
            nd = np.minimum(np.abs(e - lo), np.abs(hi - e))
            pt = e + _round_half_away((sigma * normals[:, k]) * nd)
        pt = np.minimum(np.maximum(pt, lo), hi)
        out[:, k] = pt
        prev = pt
        lo = pt + k_min
        hi = np.minimum(k_grid - k_min * (left - 2), pt + k_max)
    return out


def _sort_dedupe(buf, keep):
    buf = np.where(keep, buf, _SENTINEL)
    buf.sort(axis=1)
    dup = np.zeros_like(keep)
    dup[:, 1:] = buf[:, 1:] == buf[:, :-1]
    buf[dup] = _SENTINEL
    buf.sort(axis=1)
    valid = buf != _SENTINEL
    lengths = valid.sum(axis=1).astype(np.int64)
    buf[~valid] = 0
    return buf, lengths


def jittered(k_grid, k_req, n_avg, scale, normals):
    k = np.arange(1, k_req + 1, dtype=np.int64) * n_avg
    pts = _round_half_away(k.astype(np.float64) + (scale * normals[:, :k_req]) * n_avg)
    keep = (pts >= 1) & (pts <= k_grid)
    return _sort_dedupe(pts, keep)


def additive(k_grid, k_req, n_avg, scale, normals):
    n = normals.shape[0]
    pts = np.zeros((n, k_req), dtype=np.int64)
    keep = np.zeros((n, k_req), dtype=bool)
    prev = np.zeros(n, dtype=np.int64)
    for k in range(k_req):
        pt = _round_half_away((prev + n_avg).astype(np.float64) + (scale * normals[:, k]) * n_avg)
        ok = (pt >= 1) & (pt <= k_grid)
        pts[:, k] = pt
        keep[:, k] = ok
        prev = np.where(ok, pt, prev)
    return _sort_dedupe(pts, keep)


def interval_counts(indices, lengths, k_min, k_max):
    if indices.shape[1] < 2:
        z = np.zeros(indices.shape[0], dtype=np.int64)
        return z, z.copy()
    d = np.diff(indices, axis=1)
    valid = np.arange(d.shape[1])[None, :] < (lengths[:, None] - 1)
    under = np.count_nonzero((d < k_min) & valid, axis=1).astype(np.int64)
    over = np.count_nonzero((d > k_max) & valid, axis=1).astype(np.int64)
    return under, over


def grid_hits(indices, lengths, rows, k_grid):
    valid = np.arange(indices.shape[1])[None, :] < lengths[:, None]
    valid &= rows[:, None]
    return np.bincount(indices[valid], minlength=k_grid + 1)[1:].astype(np.int64)


def driver_trace(indices, clock_div):
    # closed-form counterpart of the cycle loop
    return np.asarray(indices, dtype=np.int64) * clock_div
