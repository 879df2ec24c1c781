"""Monotone transport maps between axis measures and the 1-D Gaussian.

For a convex potential ``B`` on ``(a, b)`` the map

    A(x) = E^{-1}( c * int_a^x exp(-t^2/2 - B(t)) dt ),   c = 1 / int_a^b ...

pushes the axis measure (scaled by ``c * sqrt(2 pi)``) onto the standard
Gaussian, and satisfies ``exp(-A^2/2) A' = c sqrt(2 pi) exp(-x^2/2 - B)``.
:func:`build_map` tabulates ``A`` on equal-mass nodes; between nodes ``A``
is a monotone cubic Hermite interpolant while ``A'`` always comes from the
closed form above.  :func:`potential_from_map` runs the construction
backwards, from a map to its potential.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .density import AxisPotential, ProductDensity, central_diff, normalization_c
from .errors import ConvergenceError, DomainError, LemmaViolationError
from .quad import CumulativeQuadrature
from .specfun import DEFAULT_TOL, SQRT_2PI, Tolerance, gauss_cdf, gauss_cdf_inv

EPS_LEMMA = 1e-7
LIMIT_FLOOR = 6.0
_LOG_SQRT_2PI = math.log(SQRT_2PI)


@dataclass(frozen=True)
class GridSpec:
    """Equal-mass node layout: ``n_nodes`` points uniform in ``y = A(x)``."""

    n_nodes: int = 401
    y_max: float = 8.0

    def __post_init__(self):
        if self.n_nodes < 5:
            raise DomainError("need at least 5 nodes")
        if not self.y_max > LIMIT_FLOOR:
            raise DomainError(f"y_max must exceed the limit floor {LIMIT_FLOOR}")

    def y_nodes(self):
        return np.linspace(-self.y_max, self.y_max, self.n_nodes)


def _hyman_slopes(x, y, m):
    """Limit Hermite slopes so each cubic piece stays monotone."""
    delta = np.diff(y) / np.diff(x)
    m = m.copy()
    bound = np.full_like(m, np.inf)
    bound[:-1] = np.minimum(bound[:-1], 3.0 * delta)
    bound[1:] = np.minimum(bound[1:], 3.0 * delta)
    return np.clip(m, 0.0, bound)


def _solve_increasing(f, df, target, lo, hi, max_iter=200):
    """Vectorized safeguarded Newton for increasing ``f`` on brackets [lo, hi]."""
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        g = f(x) - target
        hi = np.where(g > 0, x, hi)
        lo = np.where(g > 0, lo, x)
        with np.errstate(all="ignore"):
            xn = x - g / df(x)
        xn = np.where((xn > lo) & (xn < hi), xn, 0.5 * (lo + hi))
        if np.all(np.abs(xn - x) <= 4e-16 * (1.0 + np.abs(x))):
            return xn
        x = xn
    raise ConvergenceError("monotone inversion did not converge")


def _bracket(f, target, a, b, ref):
    """Points inside (a, b) where increasing ``f`` is below/above ``target``."""
    lo = np.full_like(target, ref)
    hi = np.full_like(target, ref)
    for k in range(200):
        step = 2.0**k
        lo_try = a + (ref - a) * 2.0**-k if math.isfinite(a) else ref - step
        need = f(lo) >= target
        if not need.any():
            break
        lo = np.where(need, lo_try, lo)
    for k in range(200):
        step = 2.0**k
        hi_try = b - (b - ref) * 2.0**-k if math.isfinite(b) else ref + step
        need = f(hi) <= target
        if not need.any():
            break
        hi = np.where(need, hi_try, hi)
    return lo, hi


def _midpoint(a, b):
    if math.isfinite(a) and math.isfinite(b):
        return 0.5 * (a + b)
    if math.isfinite(a):
        return a + 1.0
    if math.isfinite(b):
        return b - 1.0
    return 0.0


@dataclass(frozen=True, eq=False)
class TransportMap:
    """Tabulated increasing map ``A`` on ``(a, b)`` with closed-form derivative.

    A map is either *built* from an :class:`AxisPotential` (``potential``
    set, see :func:`build_map`) or wraps an analytic ``A`` and ``A'``
    (:meth:`from_function`).  In both cases it acts as a density axis with
    weight ``exp(-A^2/2) A'``.
    """

    a: float
    b: float
    nodes: np.ndarray
    A_values: np.ndarray
    A_prime_values: np.ndarray
    c: float
    potential: Optional[AxisPotential] = None
    A_fn: Optional[Callable] = None
    A_prime_fn: Optional[Callable] = None
    eps_lemma: float = EPS_LEMMA
    name: str = field(default="map")

    @classmethod
    def from_function(cls, A, A_prime, a=-math.inf, b=math.inf, grid: GridSpec = GridSpec(),
                      name="analytic", eps_lemma=EPS_LEMMA):
        """Wrap an analytic increasing ``A`` (with ``c = 1`` by convention)."""
        y = grid.y_nodes()
        Af = lambda x: np.asarray(A(np.asarray(x, dtype=float)), dtype=float)
        dAf = lambda x: np.asarray(A_prime(np.asarray(x, dtype=float)), dtype=float)
        lo, hi = _bracket(Af, y, a, b, _midpoint(a, b))
        x = _solve_increasing(Af, dAf, y, lo, hi)
        if not np.all(np.diff(x) > 0):
            raise DomainError("map is not strictly increasing on the node grid")
        return cls(a, b, x, Af(x), dAf(x), 1.0, None, Af, dAf, eps_lemma, name)

    # -- evaluation -------------------------------------------------------
    @cached_property
    def _spline(self):
        slopes = _hyman_slopes(self.nodes, self.A_values, self.A_prime_values)
        return CubicHermiteSpline(self.nodes, self.A_values, slopes, extrapolate=False)

    def _check_domain(self, x):
        if not np.all((x > self.a) & (x < self.b)):
            raise DomainError(f"x outside the open interval ({self.a}, {self.b})")

    def A_direct(self, x):
        """A from its integral definition (built maps only)."""
        q = self.potential.quadrature
        x = np.asarray(x, dtype=float)
        left = np.atleast_1d(q.left(x))
        right = np.atleast_1d(q.right(x))
        use_left = left <= right
        p_left = np.clip(self.c * left, 1e-300, 0.5)
        p_right = np.clip(self.c * right, 1e-300, 0.5)
        out = np.where(use_left, gauss_cdf_inv(np.where(use_left, p_left, 0.5)),
                       -gauss_cdf_inv(np.where(use_left, 0.5, p_right)))
        return out.reshape(x.shape)

    def A(self, x):
        x = np.asarray(x, dtype=float)
        self._check_domain(x)
        if self.A_fn is not None:
            out = self.A_fn(x)
        else:
            flat = np.atleast_1d(x)
            out = self._spline(flat)
            outside = (flat < self.nodes[0]) | (flat > self.nodes[-1])
            if outside.any():
                out[outside] = self.A_direct(flat[outside])
            out = out.reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    def log_A_prime(self, x):
        x = np.asarray(x, dtype=float)
        if self.A_prime_fn is not None:
            return np.log(self.A_prime_fn(x))
        A = np.asarray(self.A(x))
        return math.log(self.c * SQRT_2PI) - 0.5 * x * x - self.potential.B(x) + 0.5 * A * A

    def A_prime(self, x):
        """A'(x); closed form ``c sqrt(2 pi) exp(A^2/2 - x^2/2 - B)`` for built maps."""
        x = np.asarray(x, dtype=float)
        self._check_domain(x)
        out = np.exp(self.log_A_prime(x))
        return float(out) if np.ndim(out) == 0 else out

    def inverse(self, y):
        """x with A(x) = y."""
        y = np.asarray(y, dtype=float)
        flat = np.atleast_1d(y)
        if self.potential is not None:
            q = self.potential.quadrature
            neg = flat <= 0
            out = np.empty_like(flat)
            if neg.any():
                out[neg] = q.quantile(gauss_cdf(flat[neg]), "left")
            if (~neg).any():
                out[~neg] = q.quantile(gauss_cdf(-flat[~neg]), "right")
        else:
            lo, hi = _bracket(self.A_fn, flat, self.a, self.b, _midpoint(self.a, self.b))
            out = _solve_increasing(self.A_fn, self.A_prime_fn, flat, lo, hi)
        out = out.reshape(y.shape)
        return float(out) if out.ndim == 0 else out

    # -- density-axis protocol -------------------------------------------
    def log_weight(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > self.a) & (x < self.b)
        xs = np.where(inside, x, _midpoint(self.a, self.b))
        with np.errstate(all="ignore"):
            A = np.asarray(self.A(xs))
            v = self.log_A_prime(xs) - 0.5 * A * A
        return np.where(inside, v, -np.inf)

    def weight(self, x):
        return np.exp(self.log_weight(x))

    @cached_property
    def quadrature(self) -> CumulativeQuadrature:
        return CumulativeQuadrature(self.log_weight, self.a, self.b)

    @property
    def mass(self) -> float:
        """int_a^b exp(-A^2/2) A' dx by quadrature (sqrt(2 pi) in exact arithmetic)."""
        return self.quadrature.total

    def integral(self, l, r):
        return self.quadrature.between(l, r)

    def truncation(self, tail=1e-12):
        t = float(-gauss_cdf_inv(0.5 * tail))
        return float(self.inverse(-t)), float(self.inverse(t))

    @property
    def limits_ok(self) -> bool:
        """Both extreme node values cross the divergence floor."""
        return bool(self.A_values[0] < -LIMIT_FLOOR and self.A_values[-1] > LIMIT_FLOOR)


def build_map(p: AxisPotential, grid: GridSpec = GridSpec(), tol: Tolerance = DEFAULT_TOL,
              eps_lemma: float = EPS_LEMMA) -> TransportMap:
    """Tabulate the transport map of ``p`` on equal-mass nodes.

    Raises
    ------
    IntegrabilityError
        If the axis integral cannot be evaluated.
    LemmaViolationError
        If ``A' < 1 - eps_lemma`` at some node.
    """
    c = normalization_c(p, tol)
    q = p.quadrature
    y = grid.y_nodes()
    neg = y <= 0
    x = np.empty_like(y)
    x[neg] = q.quantile(gauss_cdf(y[neg]), "left")
    x[~neg] = q.quantile(gauss_cdf(-y[~neg]), "right")
    if not np.all(np.diff(x) > 0):
        raise DomainError("equal-mass nodes are not strictly increasing; reduce y_max or n_nodes")
    # A from its definition at the nodes, each side from its own tail
    A = np.empty_like(x)
    A[neg] = gauss_cdf_inv(c * q.left(x[neg]), tol)
    A[~neg] = -gauss_cdf_inv(c * q.right(x[~neg]), tol)
    if not np.all(np.diff(A) > 0):
        raise DomainError("tabulated map is not strictly increasing")
    Ap = np.exp(math.log(c * SQRT_2PI) - 0.5 * x * x - p.B(x) + 0.5 * A * A)
    worst = int(np.argmin(Ap))
    if Ap[worst] < 1.0 - eps_lemma:
        raise LemmaViolationError(
            f"A' = {Ap[worst]:.10g} < 1 at x = {x[worst]:.6g} for potential {p.name!r}"
        )
    m = TransportMap(p.a, p.b, x, A, Ap, c, p, eps_lemma=eps_lemma, name=p.name)
    if not m.limits_ok:
        raise DomainError("extreme nodes do not reach the divergence floor")
    return m


def map_derivative(m: TransportMap, x):
    """A'(x) from the closed form (never by differencing)."""
    return m.A_prime(x)


def identity_residual(m: TransportMap) -> float:
    """max |exp(-A^2/2) A' - c sqrt(2 pi) w(x)| over the nodes.

    ``A'`` is taken by fourth-order differencing of the integral definition
    of ``A``, an evaluation route independent of the closed form.
    """
    if m.potential is None:
        raise DomainError("identity residual needs a map built from a potential")
    x = m.nodes
    room = np.minimum(x - m.a, m.b - x)
    h = np.finfo(float).eps ** 0.2 * np.minimum(np.maximum(1.0, np.abs(x)), room)
    f = m.A_direct
    dA = (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)
    A = f(x)
    lhs = np.exp(-0.5 * A * A) * dA
    rhs = m.c * SQRT_2PI * m.potential.weight(x)
    return float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class LemmaCertificate:
    min_Aprime: float
    argmin: float
    passed: bool


def certify_lemma1(m: TransportMap, refine: int = 10) -> LemmaCertificate:
    """Minimum of A' over a grid ``refine`` times denser than the nodes."""
    x = m.nodes
    t = np.arange(refine) / refine
    dense = (x[:-1, None] + np.diff(x)[:, None] * t[None, :]).ravel()
    dense = np.concatenate((dense, x[-1:]))
    Ap = np.asarray(m.A_prime(dense))
    k = int(np.argmin(Ap))
    return LemmaCertificate(float(Ap[k]), float(dense[k]), bool(Ap[k] >= 1.0 - m.eps_lemma))


@dataclass(frozen=True)
class PotentialReport:
    """Potential recovered from a map, with its sampled convexity."""

    x: np.ndarray
    B: np.ndarray
    B_second: np.ndarray
    min_B_second: float
    argmin: float
    B_fn: Callable = field(repr=False)

    @property
    def convex(self) -> bool:
        return self.min_B_second >= -1e-8


def _default_window(A, a, b, reach=6.0, n=1201):
    lo, hi = _bracket(A, np.array([-reach, reach]), a, b, _midpoint(a, b))
    return np.linspace(lo[0], hi[1], n)


def potential_from_map(A, interval=(-math.inf, math.inf), grid=None, A_prime=None,
                       c: float = 1.0, scale: float = 1.0) -> PotentialReport:
    """Potential ``B`` with ``exp(-A^2/2) A' = c sqrt(2 pi) exp(-x^2/2 - B)``.

    ``A`` is a callable or a :class:`TransportMap` (whose closed-form
    ``A'`` is then used unless ``A_prime`` is given).  Without ``A_prime``
    the derivative of a callable is taken by fourth-order differences.
    ``grid`` is an array of sample points; by default the nodes of a map,
    or 1201 uniform points where ``|A| <= 6``.
    """
    a, b = interval
    if isinstance(A, TransportMap):
        a, b = A.a, A.b
        if A_prime is None:
            A_prime = A.A_prime
        if grid is None:
            grid = A.nodes
        A = A.A
    def step_scale(t):
        # shrink the difference step near a finite end of the interval
        return np.minimum(scale, 0.25 * np.minimum(t - a, b - t))

    if A_prime is None:
        A_prime = lambda t, _A=A: central_diff(_A, t, 1, step_scale(np.asarray(t, dtype=float)))
    if grid is None:
        grid = _default_window(lambda x: np.asarray(A(x), dtype=float), a, b)
    x = np.asarray(grid, dtype=float)
    if not np.all(np.diff(x) > 0):
        raise DomainError("grid must be strictly increasing")
    Ax = np.asarray(A(x), dtype=float)
    Apx = np.asarray(A_prime(x), dtype=float)
    if not np.all(np.diff(Ax) > 0):
        raise DomainError("A is not strictly increasing on the grid")
    if np.any(Apx < 1.0 - EPS_LEMMA):
        k = int(np.argmin(Apx))
        raise DomainError(f"A' = {Apx[k]:.6g} < 1 at x = {x[k]:.6g}")
    shift = math.log(c) + _LOG_SQRT_2PI

    def B_fn(t):
        t = np.asarray(t, dtype=float)
        At = np.asarray(A(t), dtype=float)
        return 0.5 * At * At - 0.5 * t * t - np.log(np.asarray(A_prime(t), dtype=float)) + shift

    d2 = central_diff(B_fn, x, 2, step_scale(x))
    k = int(np.argmin(d2))
    return PotentialReport(x, B_fn(x), d2, float(d2[k]), float(x[k]), B_fn)


def product_map_apply(maps: Sequence[TransportMap], x):
    """T(x', x_N) = (A_1(x_1), ..., A_{N-1}(x_{N-1}), x_N)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != len(maps) + 1:
        raise DomainError(f"points must have {len(maps) + 1} coordinates")
    out = np.empty_like(x)
    for i, m in enumerate(maps):
        out[..., i] = m.A(x[..., i])
    out[..., -1] = x[..., -1]
    return out


def transported_density(d: ProductDensity, grid: GridSpec = GridSpec(),
                        tol: Tolerance = DEFAULT_TOL) -> ProductDensity:
    """Replace every potential axis of ``d`` by its transport map."""
    axes = [build_map(ax, grid, tol) if isinstance(ax, AxisPotential) else ax for ax in d.axes]
    return ProductDensity(tuple(axes), name=f"{d.name}:transported")


def transport_constant(d: ProductDensity, tol: Tolerance = DEFAULT_TOL) -> float:
    """K with phi_transported = K * phi on S: (2 pi)^{(N-1)/2} prod c_i."""
    out = 1.0
    for ax in d.axes:
        out *= SQRT_2PI * (normalization_c(ax, tol) if isinstance(ax, AxisPotential) else 1.0 / SQRT_2PI)
    return out


def write_map_csv(m: TransportMap, path) -> None:
    """Write the node table as CSV columns x, A, Aprime."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "A", "Aprime"])
        for row in zip(m.nodes, m.A_values, m.A_prime_values):
            w.writerow([repr(float(v)) for v in row])
