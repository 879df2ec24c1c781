"""Adaptive composite Gauss-Legendre quadrature with cumulative integrals.

:class:`CumulativeQuadrature` integrates a positive weight ``w`` over an
open interval ``(a, b)`` whose ends may be infinite.  Infinite ends are
truncated where ``log w`` has dropped far below its peak and the
remainder is bounded by a log-concave tail estimate; finite ends get a
geometric mesh graded toward the endpoint so that integrable endpoint
behavior such as ``x**k`` is resolved.  Panels are bisected until the
n-point rule and its two-half refinement agree to a *relative* tolerance,
which keeps far-tail partial integrals accurate as well.

Partial integrals ``int_a^x w`` and ``int_x^b w`` are accumulated from
their own ends, so both tails keep full relative precision.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError, IntegrabilityError

_GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)
_LOG_DROP = 85.0  # exp(-85) ~ 1e-37 relative to the peak
_GRADING_LEVELS = 60
_MAX_DEPTH = 40


def _panel_rule(w, lo, hi):
    """n-point Gauss-Legendre on each panel [lo_i, hi_i] (vectorized)."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = w(x)
    return half * (vals @ _GL_W)


def _safe_logw(logw, x):
    with np.errstate(all="ignore"):
        v = np.asarray(logw(np.asarray(x, dtype=np.float64)), dtype=np.float64)
    return np.where(np.isnan(v), -np.inf, v)


def _find_cut(logw, start, direction, peak_guess, limit=1e6):
    """Step outward from ``start`` until log w is far below the running peak."""
    peak = peak_guess
    step = 0.25
    x = start
    while abs(x) < limit:
        x = start + direction * step
        lw = float(_safe_logw(logw, x))
        if lw > peak:
            peak = lw
        elif lw < peak - _LOG_DROP:
            return x, peak
        step *= 1.5
    raise IntegrabilityError("weight does not decay: integral over an infinite end diverges")


class CumulativeQuadrature:
    """Panel quadrature of a positive weight on ``(a, b)``.

    Parameters
    ----------
    logw : callable
        Vectorized ``log w(x)``; ``-inf`` where the weight vanishes.
    a, b : float
        Interval ends, possibly infinite.
    rel_tol : float
        Relative panel tolerance.
    dlogw : callable, optional
        Derivative of ``log w``; sharpens the tail estimates at infinite ends.
    """

    def __init__(self, logw, a, b, rel_tol=1e-13, dlogw=None):
        if not a < b:
            raise IntegrabilityError(f"empty interval ({a}, {b})")
        self.a, self.b = float(a), float(b)
        self.logw = logw
        self.rel_tol = rel_tol
        self.w = lambda x: np.exp(_safe_logw(logw, x))
        lo, hi, self.tail_lo, self.tail_hi = self._working_interval(dlogw)
        self.lo, self.hi = lo, hi
        edges = self._initial_edges(lo, hi)
        self.edges, self.panels = self._refine(edges)
        total = math.fsum(self.panels) + self.tail_lo + self.tail_hi
        if not math.isfinite(total) or total <= 0.0:
            raise IntegrabilityError("weight integral is not finite and positive")
        self.total = total
        # cumulative from the left end and from the right end, each summed outward-in
        self.cum_left = np.concatenate(([self.tail_lo], self.tail_lo + np.cumsum(self.panels)))
        rev = np.cumsum(self.panels[::-1])[::-1]
        self.cum_right = np.concatenate((self.tail_hi + rev, [self.tail_hi]))

    # -- construction -------------------------------------------------
    def _working_interval(self, dlogw):
        a, b = self.a, self.b
        if math.isfinite(a) and math.isfinite(b):
            return a, b, 0.0, 0.0
        if math.isfinite(a):
            ref = a + 1.0
        elif math.isfinite(b):
            ref = b - 1.0
        else:
            ref = 0.0
        # crude peak search on a coarse window around the reference point
        span = np.linspace(-8.0, 8.0, 161) + ref
        span = span[(span > a) & (span < b)]
        lw = _safe_logw(self.logw, span)
        if not np.any(np.isfinite(lw)):
            raise IntegrabilityError("weight vanishes on the probe window")
        peak = float(np.max(lw))
        x_peak = float(span[int(np.argmax(lw))])
        lo, hi, tail_lo, tail_hi = a, b, 0.0, 0.0
        if not math.isfinite(a):
            lo, peak = _find_cut(self.logw, x_peak, -1.0, peak)
            tail_lo = self._tail_estimate(lo, dlogw, -1.0)
        if not math.isfinite(b):
            hi, peak = _find_cut(self.logw, x_peak, +1.0, peak)
            tail_hi = self._tail_estimate(hi, dlogw, +1.0)
        return lo, hi, tail_lo, tail_hi

    def _tail_estimate(self, x, dlogw, direction):
        # log-concave weights: int beyond x <= w(x) / |(log w)'(x)|
        lw = float(_safe_logw(self.logw, x))
        if dlogw is not None:
            slope = abs(float(dlogw(np.float64(x))))
        else:
            h = 1e-4 * max(1.0, abs(x))
            slope = abs(float(_safe_logw(self.logw, x + h) - _safe_logw(self.logw, x - h))) / (2 * h)
        if slope <= 0.0 or not math.isfinite(slope):
            raise IntegrabilityError("cannot bound the tail of the weight")
        return math.exp(lw) / slope

    def _initial_edges(self, lo, hi):
        core = np.linspace(lo, hi, 33)
        parts = [core]
        width = hi - lo
        if math.isfinite(self.a):
            g = lo + (core[1] - lo) * 2.0 ** -np.arange(1, _GRADING_LEVELS + 1)
            parts.append(g)
        if math.isfinite(self.b):
            g = hi - (hi - core[-2]) * 2.0 ** -np.arange(1, _GRADING_LEVELS + 1)
            parts.append(g)
        edges = np.unique(np.concatenate(parts))
        edges = edges[(edges >= lo) & (edges <= hi)]
        if width <= 0:
            raise IntegrabilityError("degenerate working interval")
        return edges

    def _refine(self, edges):
        lo, hi = edges[:-1], edges[1:]
        done_lo, done_hi, done_val = [], [], []
        for _ in range(_MAX_DEPTH):
            whole = _panel_rule(self.w, lo, hi)
            mid = 0.5 * (lo + hi)
            left = _panel_rule(self.w, lo, mid)
            right = _panel_rule(self.w, mid, hi)
            halves = left + right
            err = np.abs(whole - halves)
            tiny = hi - lo <= 4.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid))
            ok = (err <= self.rel_tol * np.abs(halves)) | (halves == 0.0) | tiny
            # innermost graded panels touching a finite end are kept as they are
            end = ((lo == self.a) | (hi == self.b)) & ((hi - lo) < 1e-15 * max(1.0, self.hi - self.lo))
            ok |= end
            done_lo.append(lo[ok])
            done_hi.append(hi[ok])
            done_val.append(halves[ok])
            if ok.all():
                break
            bad = ~ok
            lo = np.concatenate((lo[bad], mid[bad]))
            hi = np.concatenate((mid[bad], hi[bad]))
        else:
            raise IntegrabilityError("panel refinement did not converge (non-integrable or non-smooth weight)")
        lo = np.concatenate(done_lo)
        hi = np.concatenate(done_hi)
        val = np.concatenate(done_val)
        order = np.argsort(lo, kind="stable")
        lo, hi, val = lo[order], hi[order], val[order]
        edges = np.concatenate((lo, hi[-1:]))
        if not np.all(np.isfinite(val)):
            raise IntegrabilityError("weight integral is not finite")
        return edges, val

    # -- evaluation -----------------------------------------------------
    def _locate(self, x):
        k = np.searchsorted(self.edges, x, side="right") - 1
        return np.clip(k, 0, len(self.panels) - 1)

    def _partial(self, s, t):
        """int_s^t w for arrays with s <= t inside one panel."""
        half = 0.5 * (t - s)
        mid = 0.5 * (t + s)
        xs = mid[..., None] + half[..., None] * _GL_X
        return half * (self.w(xs) @ _GL_W)

    def _beyond(self, x, cut, tail):
        # outside the working interval: scale the cut's tail bound by w(x)/w(cut)
        if tail == 0.0:
            return 0.0
        with np.errstate(all="ignore"):
            return tail * np.exp(_safe_logw(self.logw, x) - _safe_logw(self.logw, cut))

    def left(self, x):
        """int_a^x w, accurate relative to its own size."""
        x = np.asarray(x, dtype=np.float64)
        xc = np.clip(x, self.lo, self.hi)
        k = self._locate(xc)
        val = self.cum_left[k] + self._partial(self.edges[k], xc)
        val = np.where(x <= self.lo, self._beyond(x, self.lo, self.tail_lo), val)
        return np.where(x >= self.hi, self.total - self.tail_hi, val)

    def right(self, x):
        """int_x^b w, accurate relative to its own size."""
        x = np.asarray(x, dtype=np.float64)
        xc = np.clip(x, self.lo, self.hi)
        k = self._locate(xc)
        val = self.cum_right[k + 1] + self._partial(xc, self.edges[k + 1])
        val = np.where(x >= self.hi, self._beyond(x, self.hi, self.tail_hi), val)
        return np.where(x <= self.lo, self.total - self.tail_lo, val)

    def between(self, l, r):
        """int_l^r w, choosing the better-conditioned side."""
        l = np.asarray(l, dtype=np.float64)
        r = np.asarray(r, dtype=np.float64)
        use_left = self.left(r) <= 0.5 * self.total
        from_left = self.left(r) - self.left(l)
        from_right = self.right(l) - self.right(r)
        return np.where(use_left, from_left, from_right)

    def quantile(self, frac, side="left", max_iter=100):
        """x with ``left(x) = frac*total`` (or ``right(x)`` for side='right')."""
        frac = np.atleast_1d(np.asarray(frac, dtype=np.float64))
        target = frac * self.total
        cum = self.cum_left if side == "left" else self.cum_right
        if side == "left":
            k = np.searchsorted(cum, target, side="right") - 1
        else:
            k = np.searchsorted(-cum, -target, side="right") - 1
        k = np.clip(k, 0, len(self.panels) - 1)
        lo = self.edges[k].copy()
        hi = self.edges[k + 1].copy()
        x = 0.5 * (lo + hi)
        sign = 1.0 if side == "left" else -1.0
        f = self.left if side == "left" else self.right
        for _ in range(max_iter):
            g = f(x) - target
            # left(x) increases, right(x) decreases in x
            above = sign * g > 0
            hi = np.where(above, x, hi)
            lo = np.where(above, lo, x)
            wx = self.w(x)
            with np.errstate(all="ignore"):
                xn = x - sign * g / wx
            bad = ~((xn > lo) & (xn < hi))
            xn = np.where(bad, 0.5 * (lo + hi), xn)
            if np.all(np.abs(xn - x) <= 1e-15 * (1.0 + np.abs(x))):
                return xn
            x = xn
        raise ConvergenceError("quantile inversion did not converge")
