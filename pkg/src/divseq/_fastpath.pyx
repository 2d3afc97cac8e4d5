# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory scanners; same contract and results as _slowpath.

The control flow mirrors the pure path block for block (same checkpoints,
same screening envelope with the same 1e-12 pad, same strict comparisons),
so the two backends return identical crossing indices on identical inputs.
"""

from libc.string cimport memmove

import numpy as np

BACKEND = "compiled"


cdef Py_ssize_t _bisect(double[::1] buf, Py_ssize_t n, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if buf[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef void _insert(double[::1] buf, Py_ssize_t n, double v) noexcept nogil:
    cdef Py_ssize_t idx = _bisect(buf, n, v)
    if idx < n:
        memmove(&buf[idx + 1], &buf[idx], (n - idx) * sizeof(double))
    buf[idx] = v


cdef double _ks_one_sorted(double[::1] buf, Py_ssize_t t) noexcept nogil:
    cdef Py_ssize_t i
    cdef double best = 0.0, v, ft = <double> t
    for i in range(t):
        v = (i + 1.0) / ft - buf[i]
        if v < 0.0:
            v = -v
        if v > best:
            best = v
        v = (<double> i) / ft - buf[i]
        if v < 0.0:
            v = -v
        if v > best:
            best = v
    return best


cdef double _ks_two_sorted(
    double[::1] xs, Py_ssize_t t, double[::1] ys, Py_ssize_t s
) noexcept nogil:
    cdef Py_ssize_t i = 0, j = 0
    cdef double v, d, best = 0.0
    cdef double ft = <double> t, fs = <double> s
    while i < t or j < s:
        if j >= s or (i < t and xs[i] <= ys[j]):
            v = xs[i]
        else:
            v = ys[j]
        while i < t and xs[i] <= v:
            i += 1
        while j < s and ys[j] <= v:
            j += 1
        d = (<double> i) / ft - (<double> j) / fs
        if d < 0.0:
            d = -d
        if d > best:
            best = d
    return best


cdef double _window_min(double[::1] g, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double m = g[a]
    for i in range(a + 1, b):
        if g[i] < m:
            m = g[i]
    return m


def ks1_first_crossing(u, gamma, int block=64):
    """First t (1-based) with sup-distance of u[:t] above gamma[t-1], else 0."""
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] g = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef Py_ssize_t t_max = uv.shape[0]
    if g.shape[0] != t_max:
        raise ValueError("gamma must have one entry per observation")
    cdef Py_ssize_t start = 0, a, b, t, filled
    cdef bint hit
    while start < t_max and g[start] >= 1.0:
        start += 1
    if start == t_max:
        return 0
    buf_arr = np.empty(t_max, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    cdef double ks_a = 0.0, env
    a = start
    filled = 0
    with nogil:
        while filled < a:
            _insert(buf, filled, uv[filled])
            filled += 1
        if a > 0:
            ks_a = _ks_one_sorted(buf, a)
    while a < t_max:
        b = a + block
        if b > t_max:
            b = t_max
        if a > 0:
            env = (a * ks_a + (b - a)) / b + 1e-12
        else:
            env = 2.0
        if env <= _window_min(g, a, b):
            with nogil:
                while filled < b:
                    _insert(buf, filled, uv[filled])
                    filled += 1
                ks_a = _ks_one_sorted(buf, b)
            a = b
            continue
        t = a
        hit = False
        with nogil:
            while t < b:
                _insert(buf, filled, uv[t])
                filled += 1
                t += 1
                ks_a = _ks_one_sorted(buf, filled)
                if ks_a > g[t - 1]:
                    hit = True
                    break
        if hit:
            return t
        a = b
    return 0


def ks2_first_crossing(xu, yu, gamma, int block=64):
    """First alternating-stream step with the two-sample sup-distance above gamma."""
    cdef double[::1] xv = np.ascontiguousarray(xu, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(yu, dtype=np.float64)
    cdef double[::1] g = np.ascontiguousarray(gamma, dtype=np.float64)
    if xv.shape[0] - yv.shape[0] not in (0, 1):
        raise ValueError("alternation requires len(x) in {len(y), len(y)+1}")
    cdef Py_ssize_t n = xv.shape[0] + yv.shape[0]
    if g.shape[0] != n:
        raise ValueError("gamma must have one entry per step")
    cdef Py_ssize_t start = 0, a, b, step, ta, sa, tb, sb
    while start < n and g[start] >= 1.0:
        start += 1
    start += 1
    if start < 2:
        start = 2
    if start > n:
        return 0
    bx = np.empty(max(xv.shape[0], 1), dtype=np.float64)
    by = np.empty(max(yv.shape[0], 1), dtype=np.float64)
    cdef double[::1] sx = bx
    cdef double[::1] sy = by
    cdef double ks_a = 0.0, env
    a = start - 1
    ta = (a + 1) // 2
    sa = a // 2
    cdef Py_ssize_t fx = 0, fy = 0
    cdef bint hit
    with nogil:
        while fx < ta:
            _insert(sx, fx, xv[fx])
            fx += 1
        while fy < sa:
            _insert(sy, fy, yv[fy])
            fy += 1
        if ta > 0 and sa > 0:
            ks_a = _ks_two_sorted(sx, ta, sy, sa)
    while a < n:
        b = a + block
        if b > n:
            b = n
        tb = (b + 1) // 2
        sb = b // 2
        if ta > 0 and sa > 0:
            env = ks_a + (<double> (tb - ta)) / tb + (
                (<double> (sb - sa)) / sb if sb > 0 else 0.0
            ) + 1e-12
        else:
            env = 2.0
        if env <= _window_min(g, a, b):
            with nogil:
                while fx < tb:
                    _insert(sx, fx, xv[fx])
                    fx += 1
                while fy < sb:
                    _insert(sy, fy, yv[fy])
                    fy += 1
                if tb > 0 and sb > 0:
                    ks_a = _ks_two_sorted(sx, tb, sy, sb)
            a, ta, sa = b, tb, sb
            continue
        step = a
        hit = False
        with nogil:
            while step < b:
                step += 1
                if step % 2 == 1:
                    _insert(sx, fx, xv[fx])
                    fx += 1
                    ta += 1
                else:
                    _insert(sy, fy, yv[fy])
                    fy += 1
                    sa += 1
                if ta > 0 and sa > 0:
                    ks_a = _ks_two_sorted(sx, ta, sy, sa)
                    if ks_a > g[step - 1]:
                        hit = True
                        break
        if hit:
            return step
        a, ta, sa = b, (b + 1) // 2, b // 2
    return 0
