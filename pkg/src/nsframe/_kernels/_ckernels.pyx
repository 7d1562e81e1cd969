# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_fallback.py``.

Same inputs, same outputs, same leaf semantics.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, exp, sin, fabs, sqrt, M_PI, INFINITY

cnp.import_array()

cdef enum:
    HANN = 0
    GAUSSIAN = 1
    RCBAND = 2
    INDICATOR = 3


cdef struct Leaf:
    int code
    double center
    double dilation
    double root_d
    double param
    double lo
    double hi
    double tlo
    double thi


cdef Leaf _leaf(tuple p):
    cdef Leaf w
    w.code = <int>p[0]
    w.center = <double>p[1]
    w.dilation = <double>p[2]
    w.root_d = sqrt(w.dilation)
    w.param = <double>p[3]
    w.lo = <double>p[4]
    w.hi = <double>p[5]
    w.tlo = <double>p[6]
    w.thi = <double>p[7]
    return w


cdef inline double _sinc(double x) noexcept nogil:
    if x == 0.0:
        return 1.0
    return sin(M_PI * x) / (M_PI * x)


cdef inline double _eval(const Leaf* w, double t) noexcept nogil:
    cdef double u, v, x
    if t < w.tlo or t >= w.thi:
        return 0.0
    u = w.dilation * (t - w.center)
    if w.code == HANN:
        if fabs(u) > 0.5:
            return 0.0
        v = 0.5 + 0.5 * cos(2.0 * M_PI * u)
    elif w.code == GAUSSIAN:
        x = w.param * u
        v = exp(-M_PI * x * x)
    elif w.code == RCBAND:
        x = w.param * u
        v = w.param * (0.5 * _sinc(x) + 0.25 * _sinc(x + 1.0) + 0.25 * _sinc(x - 1.0))
    else:
        if u < w.lo or u >= w.hi:
            return 0.0
        v = 1.0
    return w.root_d * v


def leaf_eval(tuple leaf, t):
    cdef Leaf w = _leaf(leaf)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tt = np.ascontiguousarray(np.ravel(t), dtype=np.float64)
    cdef Py_ssize_t n = tt.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    for i in range(n):
        out[i] = _eval(&w, tt[i])
    return out.reshape(np.shape(t))


cdef inline double _integrand(const Leaf* A, const Leaf* B, double t, double s) noexcept nogil:
    return _eval(A, t - s) * _eval(B, s)


cdef double _simpson(const Leaf* A, const Leaf* B, double t,
                     double a, double b, double fa, double fm, double fb,
                     double whole, double tol, int depth,
                     long* fails, double* err) noexcept nogil:
    cdef double m = 0.5 * (a + b)
    cdef double lm = 0.5 * (a + m)
    cdef double rm = 0.5 * (m + b)
    cdef double flm = _integrand(A, B, t, lm)
    cdef double frm = _integrand(A, B, t, rm)
    cdef double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    cdef double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    cdef double delta = left + right - whole
    if fabs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    if depth <= 0:
        fails[0] += 1
        err[0] += fabs(delta)
        return left + right + delta / 15.0
    return (_simpson(A, B, t, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, fails, err)
            + _simpson(A, B, t, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, fails, err))


def conv_simpson_leaves(t, tuple leaf_a, tuple leaf_b, double lo, double hi,
                        double tol=1e-10, int n0=8, int max_depth=48):
    cdef Leaf A = _leaf(leaf_a)
    cdef Leaf B = _leaf(leaf_b)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tt = np.ascontiguousarray(np.atleast_1d(t), dtype=np.float64)
    cdef Py_ssize_t n = tt.shape[0], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] err = np.zeros(n)
    cdef double h = (hi - lo) / n0
    cdef double a, b, m, fa, fm, fb, acc, e, ti
    cdef long fails = 0
    with nogil:
        for i in range(n):
            ti = tt[i]
            acc = 0.0
            e = 0.0
            for j in range(n0):
                a = lo + j * h
                b = lo + (j + 1) * h if j + 1 < n0 else hi
                m = 0.5 * (a + b)
                fa = _integrand(&A, &B, ti, a)
                fm = _integrand(&A, &B, ti, m)
                fb = _integrand(&A, &B, ti, b)
                acc += _simpson(&A, &B, ti, a, b, fa, fm, fb,
                                (b - a) / 6.0 * (fa + 4.0 * fm + fb),
                                tol / n0, max_depth, &fails, &e)
            out[i] = acc
            err[i] = e
    # a point fails only if its unresolved subintervals add up to more than tol
    return out, err, int(np.count_nonzero(err > tol)) if fails else 0


def shifted_product_sums(W, shifts, weights):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] sh = np.ascontiguousarray(shifts, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t K = w.shape[0], N = w.shape[1], nl = sh.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((nl, N))
    cdef Py_ssize_t j, k, n, lo, hi
    cdef long s
    cdef double c
    with nogil:
        for j in range(nl):
            for k in range(K):
                s = sh[k, j]
                if s >= N or -s >= N:
                    continue
                c = wt[k]
                lo = s if s > 0 else 0
                hi = N + s if s < 0 else N
                for n in range(lo, hi):
                    out[j, n] += c * w[k, n] * w[k, n - s]
    return out


def walnut_apply(g, gam, M, f):
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] G = np.ascontiguousarray(g, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] H = np.ascontiguousarray(gam, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] MM = np.ascontiguousarray(M, dtype=np.int64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] F = np.ascontiguousarray(f, dtype=np.complex128)
    cdef Py_ssize_t K = G.shape[0], L = F.shape[0], k, n, l, m, r
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.zeros(L, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] fold = np.zeros(L, dtype=np.complex128)
    cdef double complex acc
    with nogil:
        for k in range(K):
            m = MM[k]
            for r in range(m):
                acc = 0
                l = r
                while l < L:
                    acc = acc + G[k, l].conjugate() * F[l]
                    l = l + m
                fold[r] = acc
            for n in range(L):
                out[n] = out[n] + m * H[k, n] * fold[n % m]
    return out
