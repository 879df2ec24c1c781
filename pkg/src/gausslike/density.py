"""Axis potentials and Gauss-like product densities.

A product density on ``S = S' x R`` has the form

    phi(x) = w_1(x_1) ... w_{N-1}(x_{N-1}) exp(-x_N^2 / 2)

where each axis weight ``w_i`` is either ``exp(-t^2/2 - B_i(t))`` for a
convex potential ``B_i`` (an :class:`AxisPotential`) or
``exp(-A_i(t)^2/2) A_i'(t)`` for a transport map ``A_i`` (a
:class:`gausslike.transport.TransportMap`).  Both axis kinds expose the
same small protocol: ``a``, ``b``, ``log_weight``, ``weight``, ``mass``,
``integral`` and ``truncation``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, IntegrabilityError
from .quad import CumulativeQuadrature
from .specfun import DEFAULT_TOL, Tolerance, gauss_cdf_inv

EPS_CONVEX_ANALYTIC = 1e-8
EPS_CONVEX_NUMERIC = 1e-5
_FD_STEP = np.finfo(float).eps ** 0.2


def central_diff(f, x, order, scale=1.0):
    """Fourth-order central difference of ``f`` (first or second derivative)."""
    x = np.asarray(x, dtype=np.float64)
    h = _FD_STEP * scale
    f2p, f1p, f1m, f2m = f(x + 2 * h), f(x + h), f(x - h), f(x - 2 * h)
    if order == 1:
        return (-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * h)
    if order == 2:
        return (-f2p + 16 * f1p - 30 * f(x) + 16 * f1m - f2m) / (12 * h * h)
    raise ValueError("order must be 1 or 2")


@dataclass(frozen=True, eq=False)
class AxisPotential:
    """Convex potential ``B`` on ``(a, b)`` defining one factor of the density.

    ``B_prime`` and ``B_second`` may be omitted; they are then obtained by
    fourth-order central differences with step ``eps**(1/5) * scale`` and the
    convexity slack widens from 1e-8 to 1e-5.
    """

    a: float
    b: float
    B: Callable
    B_prime: Optional[Callable] = None
    B_second: Optional[Callable] = None
    name: str = "custom"
    scale: float = 1.0
    eps_convex: Optional[float] = None
    check: bool = True

    def __post_init__(self):
        if not self.a < self.b:
            raise DomainError(f"need a < b, got ({self.a}, {self.b})")
        if self.eps_convex is None:
            eps = EPS_CONVEX_ANALYTIC if self.B_second is not None else EPS_CONVEX_NUMERIC
            object.__setattr__(self, "eps_convex", eps)
        if self.check:
            self.convexity_defect()

    # derivatives --------------------------------------------------------
    def dB(self, x):
        if self.B_prime is not None:
            return np.asarray(self.B_prime(np.asarray(x, dtype=float)), dtype=float)
        return central_diff(self.B, x, 1, self.scale)

    def d2B(self, x):
        if self.B_second is not None:
            return np.asarray(self.B_second(np.asarray(x, dtype=float)), dtype=float)
        return central_diff(self.B, x, 2, self.scale)

    # weight protocol ------------------------------------------------------
    def log_weight(self, x):
        x = np.asarray(x, dtype=np.float64)
        inside = (x > self.a) & (x < self.b)
        with np.errstate(all="ignore"):
            v = -0.5 * x * x - np.asarray(self.B(np.where(inside, x, self._mid)), dtype=float)
        return np.where(inside, v, -np.inf)

    def dlog_weight(self, x):
        return -np.asarray(x, dtype=float) - self.dB(x)

    def weight(self, x):
        return np.exp(self.log_weight(x))

    @cached_property
    def _mid(self):
        a, b = self.a, self.b
        if math.isfinite(a) and math.isfinite(b):
            return 0.5 * (a + b)
        if math.isfinite(a):
            return a + 1.0
        if math.isfinite(b):
            return b - 1.0
        return 0.0

    @cached_property
    def quadrature(self) -> CumulativeQuadrature:
        return CumulativeQuadrature(self.log_weight, self.a, self.b, dlogw=self.dlog_weight)

    @property
    def mass(self) -> float:
        """int_a^b exp(-t^2/2 - B(t)) dt."""
        return self.quadrature.total

    def integral(self, l, r):
        return self.quadrature.between(l, r)

    def truncation(self, tail=1e-12):
        """Interval carrying all but ``tail`` (relative) of the axis mass."""
        q = self.quadrature
        lo = q.quantile(0.5 * tail, "left")[0]
        hi = q.quantile(0.5 * tail, "right")[0]
        return float(lo), float(hi)

    def convexity_defect(self, n=2001):
        """Most negative sampled B'' (raises if below ``-eps_convex``)."""
        lo, hi = self.truncation(1e-14)
        pad = 1e-6 * (hi - lo)
        x = np.linspace(lo + pad, hi - pad, n)
        if self.B_second is None:
            h = _FD_STEP * self.scale
            x = x[(x - 2 * h > self.a) & (x + 2 * h < self.b)]
        d2 = self.d2B(x)
        worst = float(np.min(d2))
        if worst < -self.eps_convex:
            raise DomainError(
                f"potential {self.name!r} is not convex: B'' = {worst:.3e} at x = {x[int(np.argmin(d2))]:.6g}"
            )
        return worst


# -- named families -----------------------------------------------------------

def gaussian() -> AxisPotential:
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return AxisPotential(-math.inf, math.inf, zero, zero, zero, name="gaussian")


def power(k: float) -> AxisPotential:
    """B(x) = -k log x on (0, inf): the axis factor x**k exp(-x^2/2)."""
    if k < 0:
        raise DomainError("power family needs k >= 0")
    return AxisPotential(
        0.0,
        math.inf,
        lambda x: -k * np.log(x),
        lambda x: -k / np.asarray(x, dtype=float),
        lambda x: k / np.asarray(x, dtype=float) ** 2,
        name=f"power(k={k:g})",
    )


def quadratic_shift(beta: float) -> AxisPotential:
    """B(x) = beta x^2 / 2 on R."""
    return AxisPotential(
        -math.inf,
        math.inf,
        lambda x: 0.5 * beta * np.asarray(x, dtype=float) ** 2,
        lambda x: beta * np.asarray(x, dtype=float),
        lambda x: np.full_like(np.asarray(x, dtype=float), beta),
        name=f"quadratic_shift(beta={beta:g})",
    )


def custom_table(x: Sequence[float], B: Sequence[float]) -> AxisPotential:
    """Potential sampled on a grid; the interval is the table range."""
    x = np.asarray(x, dtype=float)
    B = np.asarray(B, dtype=float)
    if x.ndim != 1 or x.shape != B.shape or x.size < 4:
        raise DomainError("custom_table needs matching 1-D x and B with at least 4 samples")
    if not np.all(np.diff(x) > 0):
        raise DomainError("custom_table x must be strictly increasing")
    spline = CubicSpline(x, B)
    d1, d2 = spline.derivative(1), spline.derivative(2)
    return AxisPotential(float(x[0]), float(x[-1]), spline, d1, d2, name="custom_table")


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softplus_mixture(weights, slopes, offsets, k: float = 0.0) -> AxisPotential:
    """B(x) = sum_j w_j softplus(s_j x + o_j) [- k log x on (0, inf) if k > 0].

    Non-negative ``weights`` make ``B`` convex; used for random corpora.
    """
    w = np.asarray(weights, dtype=float)[:, None]
    s = np.asarray(slopes, dtype=float)[:, None]
    o = np.asarray(offsets, dtype=float)[:, None]
    if np.any(w < 0):
        raise DomainError("softplus weights must be non-negative")

    def lin(x):
        x = np.asarray(x, dtype=float)
        return s * x.reshape(1, -1) + o, x.shape

    def B(x):
        z, shape = lin(x)
        v = (w * _softplus(z)).sum(axis=0).reshape(shape)
        return v - k * np.log(x) if k else v

    def dB(x):
        z, shape = lin(x)
        v = (w * s * _sigmoid(z)).sum(axis=0).reshape(shape)
        return v - k / np.asarray(x, dtype=float) if k else v

    def d2B(x):
        z, shape = lin(x)
        sg = _sigmoid(z)
        v = (w * s * s * sg * (1.0 - sg)).sum(axis=0).reshape(shape)
        return v + k / np.asarray(x, dtype=float) ** 2 if k else v

    a = 0.0 if k else -math.inf
    return AxisPotential(a, math.inf, B, dB, d2B, name="softplus_mixture")


# -- product density ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProductDensity:
    """phi(x) = prod_i w_i(x_i) * exp(-x_N^2/2) on S = S' x R."""

    axes: tuple
    name: str = field(default="density")

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if len(self.axes) < 1:
            raise DomainError("a product density needs at least one x' axis (N >= 2)")

    @property
    def N(self) -> int:
        return len(self.axes) + 1

    @property
    def form(self) -> str:
        kinds = {isinstance(ax, AxisPotential) for ax in self.axes}
        if kinds == {True}:
            return "measure2"
        if kinds == {False}:
            return "defphi"
        return "mixed"

    def interval(self, i):
        ax = self.axes[i]
        return ax.a, ax.b

    def inside(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ok = np.isfinite(x[..., -1])
        for i, ax in enumerate(self.axes):
            ok &= (x[..., i] > ax.a) & (x[..., i] < ax.b)
        return ok

    def log_phi(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.N:
            raise DomainError(f"points must have {self.N} coordinates")
        v = -0.5 * x[..., -1] ** 2
        for i, ax in enumerate(self.axes):
            v = v + ax.log_weight(x[..., i])
        return v

    def xprime_truncation(self, tail=1e-12):
        return [ax.truncation(tail) for ax in self.axes]

    def xN_truncation(self, tail=1e-12):
        t = float(-gauss_cdf_inv(0.5 * tail))
        return -t, t


def normalization_c(p: AxisPotential, tol: Tolerance = DEFAULT_TOL) -> float:
    """c = 1 / int_a^b exp(-t^2/2 - B(t)) dt."""
    q = p.quadrature
    err = q.tail_lo + q.tail_hi
    if not math.isfinite(q.total) or q.total <= 0:
        raise IntegrabilityError(f"axis integral of {p.name!r} is not finite")
    if err > tol.rel_tol * q.total:
        raise IntegrabilityError(f"tail estimate {err:.3e} exceeds rel_tol for {p.name!r}")
    return 1.0 / q.total


def c_mu(d: ProductDensity, tol: Tolerance = DEFAULT_TOL) -> float:
    """C_mu = product over x'-axes of the axis integrals."""
    out = 1.0
    for ax in d.axes:
        if isinstance(ax, AxisPotential):
            normalization_c(ax, tol)
        out *= ax.mass
    return out


def phi_eval(d: ProductDensity, x) -> np.ndarray | float:
    """Density value at points strictly inside S (shape ``(..., N)``)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d.N:
        raise DomainError(f"points must have {d.N} coordinates")
    if not np.all(d.inside(x)):
        raise DomainError("point on or outside the boundary of S")
    v = np.exp(d.log_phi(x))
    return float(v) if v.ndim == 0 else v


def axis_cdf(ax, x):
    """Fraction of axis mass below ``x``."""
    return ax.quadrature.left(x) / ax.mass


@dataclass(frozen=True)
class SeparabilityReport:
    separated: bool
    residual: float


def separability_check(phi, xN, tol=1e-8) -> SeparabilityReport:
    """Test the product-form necessary condition on sampled densities.

    ``phi`` holds positive samples with the last axis along ``x_N``
    (grid ``xN``); all leading axes are x'.  At every x_N level the
    logarithmic derivative in x_N must not vary with x'.
    """
    phi = np.asarray(phi, dtype=float)
    if not np.all(phi > 0) or not np.all(np.isfinite(phi)):
        raise DomainError("density samples must be finite and positive")
    if phi.ndim < 2:
        raise DomainError("need at least one x' axis")
    dlog = np.gradient(np.log(phi), np.asarray(xN, dtype=float), axis=-1, edge_order=2)
    flat = dlog.reshape(-1, dlog.shape[-1])
    spread = flat.max(axis=0) - flat.min(axis=0)
    residual = float(spread.max())
    return SeparabilityReport(residual <= tol, residual)


__all__ = [
    "AxisPotential",
    "ProductDensity",
    "SeparabilityReport",
    "axis_cdf",
    "c_mu",
    "custom_table",
    "gaussian",
    "normalization_c",
    "phi_eval",
    "power",
    "quadratic_shift",
    "separability_check",
    "softplus_mixture",
]
