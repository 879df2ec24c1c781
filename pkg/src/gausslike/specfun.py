"""Gaussian distribution and tail integrals, and their inverses.

``gauss_cdf`` is the standard normal distribution function E and
``gauss_tail`` the unnormalized upper tail

    F(t) = int_t^inf exp(-s^2/2) ds = sqrt(2 pi) (1 - E(t)).

Both accept scalars or arrays and extended-real arguments.  The
inverses are the hot path of map construction and run in the compiled
kernel when it is available (see ``_backend``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ._backend import kernels
from .errors import ConvergenceError, DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)
SQRT_PI_2 = math.sqrt(0.5 * math.pi)
_SQRT1_2 = math.sqrt(0.5)
_XTOL = 4e-16


@dataclass(frozen=True)
class Tolerance:
    """Accuracy targets for iterative and quadrature routines."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise DomainError(f"{name} must lie in (0, 1), got {v!r}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise DomainError(f"max_iter must be a positive integer, got {self.max_iter!r}")


DEFAULT_TOL = Tolerance()


def _out(x, arr):
    return float(arr) if np.ndim(x) == 0 else arr


def gauss_cdf(y):
    """Standard normal distribution function E(y); E(+-inf) = 1, 0."""
    y_arr = np.asarray(y, dtype=np.float64)
    return _out(y, special.ndtr(y_arr))


def gauss_tail(t):
    """F(t) = int_t^inf exp(-s^2/2) ds, computed without cancellation."""
    t_arr = np.asarray(t, dtype=np.float64)
    return _out(t, SQRT_PI_2 * special.erfc(t_arr * _SQRT1_2))


def gauss_tail_scaled(t):
    """exp(t^2/2) F(t) (the Mills ratio), finite for all finite t."""
    t_arr = np.asarray(t, dtype=np.float64)
    return _out(t, SQRT_PI_2 * special.erfcx(t_arr * _SQRT1_2))


def gauss_pdf(y):
    y_arr = np.asarray(y, dtype=np.float64)
    return _out(y, np.exp(-0.5 * y_arr * y_arr) / SQRT_2PI)


def _run(kernel, arr, tol, what):
    flat = np.ascontiguousarray(arr, dtype=np.float64).ravel()
    out, failed = kernel(flat, _XTOL, int(tol.max_iter))
    if failed:
        raise ConvergenceError(f"{what}: {failed} point(s) did not converge in {tol.max_iter} iterations")
    return np.asarray(out).reshape(np.shape(arr))


def gauss_cdf_inv(p, tol: Tolerance = DEFAULT_TOL):
    """Inverse of ``gauss_cdf`` on (0, 1).

    Raises
    ------
    DomainError
        If any ``p`` lies outside the open unit interval.
    ConvergenceError
        If the safeguarded Newton iteration exhausts ``tol.max_iter``.
    """
    p_arr = np.asarray(p, dtype=np.float64)
    if not np.all((p_arr > 0.0) & (p_arr < 1.0)):
        raise DomainError("gauss_cdf_inv needs p in (0, 1)")
    return _out(p, _run(kernels.cdf_inv, p_arr, tol, "gauss_cdf_inv"))


def gauss_tail_inv(m, tol: Tolerance = DEFAULT_TOL):
    """Inverse of ``gauss_tail`` on (0, sqrt(2 pi))."""
    m_arr = np.asarray(m, dtype=np.float64)
    if not np.all((m_arr > 0.0) & (m_arr < SQRT_2PI)):
        raise DomainError("gauss_tail_inv needs m in (0, sqrt(2*pi))")
    return _out(m, _run(kernels.tail_inv, m_arr / SQRT_2PI, tol, "gauss_tail_inv"))
