"""Pure numpy twin of the compiled ``_kernels`` module.

Same algorithm, vectorized over the active set: safeguarded Newton on
``log E(y) = log p`` for p <= 1/2 with bisection fallback on [-40, 0].
"""
import numpy as np
from scipy.special import log_ndtr

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_BRACKET = 40.0


def _guess(p):
    t = np.sqrt(-2.0 * np.log(p))
    num = 2.515517 + 0.802853 * t + 0.010328 * t * t
    den = 1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t ** 3
    return -(t - num / den)


def _lower(p, xtol, max_iter):
    p = np.asarray(p, dtype=np.float64)
    lo = np.full_like(p, -_BRACKET)
    hi = np.zeros_like(p)
    target = np.log(p)
    y = _guess(p)
    bad = ~((y > lo) & (y < hi))
    y[bad] = 0.5 * (lo[bad] + hi[bad])
    active = np.ones(p.shape, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        ya = y[idx]
        lc = log_ndtr(ya)
        g = lc - target[idx]
        up = g > 0.0
        hi[idx[up]] = ya[up]
        lo[idx[~up]] = ya[~up]
        d = np.exp(-0.5 * ya * ya - _LOG_SQRT_2PI - lc)
        with np.errstate(divide="ignore", invalid="ignore"):
            ynew = ya - g / d
        # Newton can cycle between neighbouring floats; a collapsed bracket ends it
        collapsed = hi[idx] - lo[idx] <= 2.0 * xtol * (1.0 + np.abs(ya))
        ynew[collapsed] = ya[collapsed]
        done = collapsed | (g == 0.0) | (np.abs(ynew - ya) <= xtol * (1.0 + np.abs(ya)))
        outside = ~done & ~((ynew > lo[idx]) & (ynew < hi[idx]))
        ynew[outside] = 0.5 * (lo[idx[outside]] + hi[idx[outside]])
        y[idx] = ynew
        active[idx[done]] = False
    return y, int(active.sum())


def cdf_inv(p, xtol, max_iter):
    p = np.ascontiguousarray(p, dtype=np.float64)
    upper = p > 0.5
    base = np.where(upper, 1.0 - p, p)
    r, failed = _lower(base, xtol, max_iter)
    return np.where(upper, -r, r), failed


def tail_inv(q, xtol, max_iter):
    q = np.ascontiguousarray(q, dtype=np.float64)
    upper = q > 0.5
    base = np.where(upper, 1.0 - q, q)
    r, failed = _lower(base, xtol, max_iter)
    return np.where(upper, r, -r), failed
