# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inversion kernels for the Gaussian distribution function.

Both routines run a safeguarded Newton iteration on ``log E(y) = log p``
in the lower half (p <= 1/2) with a bisection fallback on [-40, 0];
upper-half arguments are reflected.  ``_kernels_py`` mirrors the
algorithm step for step in numpy.
"""
import numpy as np

from libc.math cimport erfc, exp, log, sqrt, fabs

cdef double SQRT1_2 = 0.7071067811865476
cdef double LOG_SQRT_2PI = 0.9189385332046728
cdef double BRACKET = 40.0


cdef inline double _log_cdf(double y) nogil:
    cdef double t, z
    cdef int k
    if y > -8.0:
        return log(0.5 * erfc(-y * SQRT1_2))
    # deep lower tail: Mills ratio by its continued fraction (16 terms are
    # exact to rounding for z >= 8), evaluated backwards
    z = -y
    t = z
    for k in range(16, 0, -1):
        t = z + k / t
    return -0.5 * y * y - LOG_SQRT_2PI - log(t)


cdef inline double _guess(double p) nogil:
    # Abramowitz-Stegun 26.2.23, |error| < 4.5e-4
    cdef double t = sqrt(-2.0 * log(p))
    return -(t - (2.515517 + 0.802853 * t + 0.010328 * t * t)
             / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t))


cdef int _lower(double p, double xtol, int max_iter, double* out) nogil:
    """Solve E(y) = p for p in (0, 1/2]; returns iterations used or -1."""
    cdef double lo = -BRACKET, hi = 0.0
    cdef double target = log(p)
    cdef double y = _guess(p)
    cdef double g, lc, d, ynew
    cdef int it
    if y <= lo or y >= hi:
        y = 0.5 * (lo + hi)
    for it in range(1, max_iter + 1):
        lc = _log_cdf(y)
        g = lc - target
        if g > 0.0:
            hi = y
        else:
            lo = y
        # Newton can cycle between neighbouring floats; a collapsed bracket ends it
        if hi - lo <= 2.0 * xtol * (1.0 + fabs(y)):
            out[0] = y
            return it
        d = exp(-0.5 * y * y - LOG_SQRT_2PI - lc)
        ynew = y - g / d
        if g == 0.0 or fabs(ynew - y) <= xtol * (1.0 + fabs(y)):
            out[0] = ynew
            return it
        if not (ynew > lo and ynew < hi):
            ynew = 0.5 * (lo + hi)
        y = ynew
    out[0] = y
    return -1


def cdf_inv(double[::1] p, double xtol, int max_iter):
    """Elementwise inverse of the standard normal distribution function.

    Returns ``(y, n_failed)``; entries that did not converge keep their
    last iterate.
    """
    cdef Py_ssize_t i, n = p.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef double q, r
    cdef int failed = 0, it
    with nogil:
        for i in range(n):
            q = p[i]
            if q <= 0.5:
                it = _lower(q, xtol, max_iter, &r)
                y[i] = r
            else:
                it = _lower(1.0 - q, xtol, max_iter, &r)
                y[i] = -r
            if it < 0:
                failed += 1
    return out, failed


def tail_inv(double[::1] q, double xtol, int max_iter):
    """Elementwise t with Q(t) = q, Q the standard normal upper tail."""
    cdef Py_ssize_t i, n = q.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] t = out
    cdef double v, r
    cdef int failed = 0, it
    with nogil:
        for i in range(n):
            v = q[i]
            if v <= 0.5:
                it = _lower(v, xtol, max_iter, &r)
                t[i] = -r
            else:
                it = _lower(1.0 - v, xtol, max_iter, &r)
                t[i] = r
            if it < 0:
                failed += 1
    return out, failed
