# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled orbit and Ulam kernels.

Every function here has a numpy twin in ``_kernels_py`` with the same
signature and, for orbits, the same floating point operation order, so the
two backends agree bit for bit on the machines we test.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, sin, floor, sqrt
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

DEF GOLDEN = 0x9E3779B97F4A7C15
DEF IDXMUL = 0xD1B54A32D192ED03
DEF INV53 = 1.1102230246251565e-16

cdef enum:
    FAM_PL = 0
    FAM_INTERMITTENT = 1
    FAM_QUADRATIC = 2

cdef inline uint64_t splitmix(uint64_t z) nogil:
    z = z + <uint64_t>GOLDEN
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)

cdef inline double counter_uniform(uint64_t key, uint64_t idx, uint64_t step) nogil:
    cdef uint64_t h = splitmix(key ^ (idx * <uint64_t>IDXMUL))
    h = splitmix(h + step)
    return <double>(h >> 11) * INV53


def stream_key(seed, stream):
    """Key of one random stream; mirrors ``_kernels_py.stream_key``."""
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t t = <uint64_t>(int(stream) + 1)
    return int(splitmix(s + t * <uint64_t>GOLDEN))


def uniforms(key, cnp.int64_t[::1] idx, step):
    cdef Py_ssize_t i, m = idx.shape[0]
    cdef uint64_t k = <uint64_t>int(key)
    cdef uint64_t st = <uint64_t>int(step)
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(m):
            o[i] = counter_uniform(k, <uint64_t>idx[i], st)
    return out


cdef inline double step_1d(double x, int family, const double[::1] par,
                           const double[::1] rights, const double[::1] slopes,
                           const double[::1] offsets) nogil:
    cdef Py_ssize_t b, nb
    if family == FAM_PL:
        nb = rights.shape[0]
        b = 0
        while b < nb - 1 and x > rights[b]:
            b += 1
        return slopes[b] * x + offsets[b]
    elif family == FAM_INTERMITTENT:
        if x <= 0.5:
            # sqrt is correctly rounded everywhere, pow is not
            if par[0] == 0.5:
                return x * (1.0 + par[1] * sqrt(x))
            return x * (1.0 + par[1] * pow(x, par[0]))
        return 2.0 * x - 1.0
    else:
        return par[0] - x * x


def iterate_1d(double[::1] x0, Py_ssize_t n, int family, const double[::1] par,
               const double[::1] rights, const double[::1] slopes,
               const double[::1] offsets, double lo, double hi,
               dither_key, double dither_scale, Py_ssize_t index0,
               Py_ssize_t t0, bint record):
    """Iterate a batch of 1-D points ``n`` times.

    Returns ``(out, bad)``; ``out`` is the trajectory ``(m, n+1)`` when
    ``record`` else the final points, and ``bad`` is the first escaped
    point index or -1.
    """
    cdef Py_ssize_t m = x0.shape[0]
    cdef Py_ssize_t i, t
    cdef double x, d, tol = 1e-12
    cdef bint use_dither = dither_key is not None and dither_scale > 0
    cdef uint64_t key = <uint64_t>int(dither_key) if use_dither else 0
    cdef Py_ssize_t bad = -1
    if record:
        out = np.empty((m, n + 1), dtype=np.float64)
    else:
        out = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] traj
    cdef double[::1] fin
    if record:
        traj = out
    else:
        fin = out
    with nogil:
        for i in range(m):
            x = x0[i]
            if record:
                traj[i, 0] = x
            for t in range(n):
                x = step_1d(x, family, par, rights, slopes, offsets)
                if use_dither:
                    d = dither_scale * counter_uniform(key, <uint64_t>(index0 + i),
                                                       <uint64_t>(t0 + t))
                    if x + d <= hi:
                        x = x + d
                    else:
                        x = x - d
                if x < lo or x > hi:
                    if x < lo - tol or x > hi + tol:
                        if bad < 0:
                            bad = i
                    x = lo if x < lo else hi
                if record:
                    traj[i, t + 1] = x
            if not record:
                fin[i] = x
    return out, bad


def iterate_viana(double[::1] s0, double[::1] x0, Py_ssize_t n, double a0,
                  double alpha, double d, double xlo, double xhi, dither_key,
                  double dither_scale, Py_ssize_t index0, Py_ssize_t t0,
                  bint record):
    """Iterate the skew product ``(s, x) -> (d s mod 1, a0 + alpha sin(2 pi s) - x^2)``."""
    cdef Py_ssize_t m = s0.shape[0]
    cdef Py_ssize_t i, t
    cdef double s, x, sn, u
    cdef double twopi = 6.283185307179586
    cdef bint use_dither = dither_key is not None and dither_scale > 0
    cdef uint64_t key = <uint64_t>int(dither_key) if use_dither else 0
    cdef Py_ssize_t bad = -1
    cdef Py_ssize_t cols = n + 1 if record else 1
    out_s = np.empty((m, cols), dtype=np.float64)
    out_x = np.empty((m, cols), dtype=np.float64)
    cdef double[:, ::1] os = out_s
    cdef double[:, ::1] ox = out_x
    with nogil:
        for i in range(m):
            s = s0[i]
            x = x0[i]
            if record:
                os[i, 0] = s
                ox[i, 0] = x
            for t in range(n):
                sn = d * s
                sn = sn - floor(sn)
                x = a0 + alpha * sin(twopi * s) - x * x
                s = sn
                if use_dither:
                    u = dither_scale * counter_uniform(key, <uint64_t>(index0 + i),
                                                       <uint64_t>(t0 + t))
                    s = s + u
                    if s >= 1.0:
                        s = s - 1.0
                if x < xlo - 1e-12 or x > xhi + 1e-12:
                    if bad < 0:
                        bad = i
                if record:
                    os[i, t + 1] = s
                    ox[i, t + 1] = x
            if not record:
                os[i, 0] = s
                ox[i, 0] = x
    if not record:
        return out_s[:, 0].copy(), out_x[:, 0].copy(), bad
    return out_s, out_x, bad


def interval_overlaps(const double[::1] lo, const double[::1] hi,
                      const cnp.int64_t[::1] col, const double[::1] edges):
    """Overlap lengths of intervals ``[lo_k, hi_k]`` with the bins of ``edges``.

    Returns COO triplets ``(row, col, length)`` with zero-length pieces dropped.
    """
    cdef Py_ssize_t K = lo.shape[0], nb = edges.shape[0] - 1
    cdef Py_ssize_t k, i, i0, a, b, mid, cnt = 0, pos = 0
    cdef double L, R, piece
    cdef cnp.int64_t[::1] start = np.empty(K, dtype=np.int64)
    with nogil:
        for k in range(K):
            L = lo[k]
            R = hi[k]
            if R <= L:
                start[k] = -1
                continue
            # last edge index with edges[a] <= L
            a = 0
            b = nb
            while b - a > 1:
                mid = (a + b) // 2
                if edges[mid] <= L:
                    a = mid
                else:
                    b = mid
            start[k] = a
            i = a
            while i < nb and edges[i] < R:
                cnt += 1
                i += 1
    rows = np.empty(cnt, dtype=np.int64)
    cols = np.empty(cnt, dtype=np.int64)
    vals = np.empty(cnt, dtype=np.float64)
    cdef cnp.int64_t[::1] rv = rows
    cdef cnp.int64_t[::1] cv = cols
    cdef double[::1] vv = vals
    with nogil:
        for k in range(K):
            i0 = start[k]
            if i0 < 0:
                continue
            L = lo[k]
            R = hi[k]
            i = i0
            while i < nb and edges[i] < R:
                piece = (R if R < edges[i + 1] else edges[i + 1]) - (L if L > edges[i] else edges[i])
                rv[pos] = i
                cv[pos] = col[k]
                vv[pos] = piece
                pos += 1
                i += 1
    keep = vals > 0
    return rows[keep], cols[keep], vals[keep]
