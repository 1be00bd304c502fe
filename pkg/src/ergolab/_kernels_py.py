"""Pure numpy fallback for the compiled kernels.

Same signatures as ``_kernels.pyx``.  Orbits are vectorized over points and
loop over time, which keeps the arithmetic per point identical to the
compiled loop.
"""
import math

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
IDXMUL = 0xD1B54A32D192ED03
MASK = 0xFFFFFFFFFFFFFFFF
INV53 = 1.1102230246251565e-16

FAM_PL = 0
FAM_INTERMITTENT = 1
FAM_QUADRATIC = 2

_U = np.uint64


def _splitmix_int(z):
    z = (z + GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def _splitmix(z):
    z = z + _U(GOLDEN)
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    return z ^ (z >> _U(31))


def stream_key(seed, stream):
    s = int(seed) & MASK
    t = (int(stream) + 1) & MASK
    return _splitmix_int((s + t * GOLDEN) & MASK)


def _counter_uniform(key, idx, step):
    with np.errstate(over="ignore"):
        h = _splitmix(_U(key) ^ (idx.astype(np.uint64) * _U(IDXMUL)))
        h = _splitmix(h + _U(int(step) & MASK))
    return (h >> _U(11)).astype(np.float64) * INV53


def uniforms(key, idx, step):
    return _counter_uniform(key, np.asarray(idx, dtype=np.int64), step)


def _step(x, family, par, rights, slopes, offsets):
    if family == FAM_PL:
        b = np.searchsorted(rights[:-1], x, side="left")
        return slopes[b] * x + offsets[b]
    if family == FAM_INTERMITTENT:
        left = x <= 0.5
        y = 2.0 * x - 1.0
        xl = x[left]
        if par[0] == 0.5:
            xg = np.sqrt(xl)
        else:
            # libm pow, element by element, to match the compiled kernel
            xg = np.fromiter((math.pow(v, par[0]) for v in xl), float, xl.size)
        y[left] = xl * (1.0 + par[1] * xg)
        return y
    return par[0] - x * x


def iterate_1d(x0, n, family, par, rights, slopes, offsets, lo, hi,
               dither_key, dither_scale, index0, t0, record):
    x = np.array(x0, dtype=np.float64, copy=True)
    m = x.shape[0]
    use_dither = dither_key is not None and dither_scale > 0
    idx = np.arange(index0, index0 + m, dtype=np.int64)
    bad = -1
    tol = 1e-12
    traj = np.empty((m, n + 1)) if record else None
    if record:
        traj[:, 0] = x
    for t in range(n):
        x = _step(x, family, par, rights, slopes, offsets)
        if use_dither:
            d = dither_scale * _counter_uniform(dither_key, idx, t0 + t)
            up = x + d <= hi
            x = np.where(up, x + d, x - d)
        out = (x < lo) | (x > hi)
        if out.any():
            far = (x < lo - tol) | (x > hi + tol)
            if far.any() and bad < 0:
                bad = int(np.flatnonzero(far)[0])
            x = np.clip(x, lo, hi)
        if record:
            traj[:, t + 1] = x
    return (traj if record else x), bad


def iterate_viana(s0, x0, n, a0, alpha, d, xlo, xhi, dither_key, dither_scale,
                  index0, t0, record):
    s = np.array(s0, dtype=np.float64, copy=True)
    x = np.array(x0, dtype=np.float64, copy=True)
    m = s.shape[0]
    use_dither = dither_key is not None and dither_scale > 0
    idx = np.arange(index0, index0 + m, dtype=np.int64)
    bad = -1
    twopi = 6.283185307179586
    if record:
        ts = np.empty((m, n + 1))
        tx = np.empty((m, n + 1))
        ts[:, 0] = s
        tx[:, 0] = x
    for t in range(n):
        sn = d * s
        sn = sn - np.floor(sn)
        x = a0 + alpha * np.sin(twopi * s) - x * x
        s = sn
        if use_dither:
            s = s + dither_scale * _counter_uniform(dither_key, idx, t0 + t)
            s = np.where(s >= 1.0, s - 1.0, s)
        far = (x < xlo - 1e-12) | (x > xhi + 1e-12)
        if bad < 0 and far.any():
            bad = int(np.flatnonzero(far)[0])
        if record:
            ts[:, t + 1] = s
            tx[:, t + 1] = x
    if record:
        return ts, tx, bad
    return s, x, bad


def interval_overlaps(lo, hi, col, edges):
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    col = np.asarray(col, dtype=np.int64)
    nb = edges.shape[0] - 1
    ok = hi > lo
    lo, hi, col = lo[ok], hi[ok], col[ok]
    i0 = np.clip(np.searchsorted(edges, lo, side="right") - 1, 0, nb - 1)
    i1 = np.clip(np.searchsorted(edges, hi, side="left") - 1, 0, nb - 1)
    counts = i1 - i0 + 1
    k = np.repeat(np.arange(lo.shape[0]), counts)
    first = np.repeat(np.cumsum(counts) - counts, counts)
    rows = i0[k] + (np.arange(k.shape[0]) - first)
    right = np.minimum(hi[k], edges[rows + 1])
    left = np.maximum(lo[k], edges[rows])
    vals = right - left
    keep = vals > 0
    return rows[keep].astype(np.int64), col[k][keep], vals[keep]
