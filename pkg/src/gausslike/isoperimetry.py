"""Weighted volume and perimeter of test sets, and half-space comparisons.

Test sets ``M`` live in ``S = S' x R`` and come in four kinds (see
:class:`RegionSpec`): half-space slices ``S' x (lam, inf)``, graph sets
``{x_N > u(x')}``, unions of x_N-slabs and unions of boxes.  Slabs and boxes
are integrated exactly axis by axis; graph sets use composite Simpson
quadrature on a truncated x' box, with the graph gradient from centered
differences.  The discretization error of a graph computation is
estimated by repeating it with half the grid spacing.

The perimeter is relative to ``S``: faces lying on the boundary of ``S``
(including the truncation faces) do not count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .density import ProductDensity, axis_cdf
from .errors import ConvergenceError, DomainError, RegionError
from .quad import CumulativeQuadrature
from .specfun import SQRT_2PI, gauss_cdf, gauss_cdf_inv, gauss_tail, gauss_tail_inv

MASS_TAIL = 1e-11
NOISE_REL = 1e-10
DEFAULT_LEVEL = 101


# -- regions ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RegionSpec:
    """A test set M in S.

    Use the constructors :meth:`halfspace_slice`, :meth:`graph`,
    :meth:`slab_union` and :meth:`box_union`.  A graph function receives
    points of shape ``(..., N-1)`` and returns values of shape ``(...)``.
    """

    kind: str
    lam: Optional[float] = None
    u: Optional[Callable] = None
    intervals: tuple = ()
    boxes: tuple = ()
    lipschitz: float = 50.0
    name: str = ""

    @classmethod
    def halfspace_slice(cls, lam, name=""):
        return cls("halfspace_slice", lam=float(lam), name=name or f"slice({lam:g})")

    @classmethod
    def graph(cls, u, lipschitz=50.0, name="graph"):
        return cls("graph", u=u, lipschitz=float(lipschitz), name=name)

    @classmethod
    def slab_union(cls, intervals, name="slabs"):
        iv = tuple(sorted((float(l), float(r)) for l, r in intervals))
        for l, r in iv:
            if not l < r:
                raise RegionError(f"empty slab ({l}, {r})")
        for (_, r0), (l1, _) in zip(iv, iv[1:]):
            if not r0 < l1:
                raise RegionError("slabs must be pairwise separated")
        return cls("slab_union", intervals=iv, name=name)

    @classmethod
    def box_union(cls, boxes, name="boxes"):
        bx = tuple(tuple((float(l), float(r)) for l, r in box) for box in boxes)
        dims = {len(b) for b in bx}
        if len(dims) != 1:
            raise RegionError("boxes must share one dimension")
        for box in bx:
            if any(not l < r for l, r in box):
                raise RegionError("degenerate box")
        for i, p in enumerate(bx):
            for q in bx[i + 1:]:
                apart = any(pr < ql or qr < pl for (pl, pr), (ql, qr) in zip(p, q))
                if not apart:
                    raise RegionError("boxes must be pairwise separated")
        return cls("box_union", boxes=bx, name=name)


@dataclass(frozen=True)
class GaussReference:
    """Standard Gaussian measure on R^N."""

    N: int

    def halfspace_measure(self, lam):
        return gauss_tail(lam) / SQRT_2PI

    def halfspace_perimeter(self, lam):
        return math.exp(-0.5 * lam * lam) / SQRT_2PI

    def total_mass(self, n=2001):
        y = np.linspace(-12.0, 12.0, n)
        one_d = integrate.simpson(np.exp(-0.5 * y * y), x=y) / SQRT_2PI
        return one_d**self.N


# -- tensor grids on the truncated x' box ----------------------------------------

def simpson_weights(x):
    n = x.size
    if n < 3 or n % 2 == 0:
        raise DomainError("Simpson rule needs an odd number of nodes >= 3")
    h = x[1] - x[0]
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


@dataclass(frozen=True, eq=False)
class TensorGrid:
    """Uniform tensor grid with Simpson weights times the x' density."""

    axes: tuple
    weights: np.ndarray
    rho: np.ndarray

    @property
    def points(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @property
    def spacing(self):
        return tuple(float(a[1] - a[0]) for a in self.axes)

    @property
    def c_q(self):
        """Grid value of the x' integral of rho."""
        return float(np.sum(self.weights * self.rho))


def _outer(vectors):
    out = vectors[0]
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


def density_grid(d: ProductDensity, n: int, tail: float = MASS_TAIL) -> TensorGrid:
    """Grid of ``n`` nodes per x' axis on the box carrying all but ``tail`` of the mass.

    Each axis rule is rescaled so that it integrates the axis weight
    exactly; flat graphs then reproduce the slice values.
    """
    axes, ws, rhos = [], [], []
    for ax in d.axes:
        lo, hi = ax.truncation(tail)
        x = np.linspace(lo, hi, n)
        w = simpson_weights(x)
        r = ax.weight(x)
        axes.append(x)
        ws.append(w * (ax.mass / float(np.sum(w * r))))
        rhos.append(r)
    return TensorGrid(tuple(axes), _outer(ws), _outer(rhos))


def gauss_grid(N: int, n: int, tail: float = MASS_TAIL) -> TensorGrid:
    """Grid on (-Y, Y)^{N-1} with rho the standard Gaussian density factors."""
    Y = float(-gauss_cdf_inv(0.5 * tail))
    y = np.linspace(-Y, Y, n)
    g = np.exp(-0.5 * y * y) / SQRT_2PI
    w = simpson_weights(y)
    w = w / float(np.sum(w * g))
    return TensorGrid(tuple([y] * (N - 1)), _outer([w] * (N - 1)), _outer([g] * (N - 1)))


def _graph_terms(grid: TensorGrid, U, lipschitz):
    """(volume, perimeter) of {x_N > U} against the grid measure."""
    if not np.all(np.isfinite(U)):
        raise RegionError("graph function is not finite on the grid")
    grads = np.gradient(U, *grid.axes, edge_order=2)
    if U.ndim == 1:
        grads = [grads]
    g2 = sum(g * g for g in grads)
    steepest = float(np.sqrt(g2.max()))
    if steepest > lipschitz:
        raise RegionError(f"graph slope {steepest:.3g} exceeds the Lipschitz bound {lipschitz:g}")
    wr = grid.weights * grid.rho
    vol = float(np.sum(wr * gauss_tail(U)))
    per = float(np.sum(wr * np.exp(-0.5 * U * U) * np.sqrt(1.0 + g2)))
    return vol, per


def _eval_graph(M: RegionSpec, grid: TensorGrid):
    return np.asarray(M.u(grid.points), dtype=float).reshape(grid.rho.shape)


# -- slab and box integrals ---------------------------------------------------

def _xN_mass(l, r):
    # int_l^r exp(-t^2/2) dt, using the better-conditioned tail
    if l >= 0:
        return gauss_tail(l) - gauss_tail(r)
    if r <= 0:
        return gauss_tail(-r) - gauss_tail(-l)
    return SQRT_2PI - gauss_tail(r) - gauss_tail(-l)


def _xN_face(t):
    return 0.0 if math.isinf(t) else math.exp(-0.5 * t * t)


def _axis_piece(ax, l, r):
    lo, hi = max(l, ax.a), min(r, ax.b)
    if not lo < hi:
        return 0.0
    return float(ax.integral(lo, hi))


def _axis_face(ax, t):
    # facet weight at x_i = t, zero if the face sits on the boundary of S
    if not (ax.a < t < ax.b):
        return 0.0
    return float(ax.weight(t))


def _check_inside(d: ProductDensity, M: RegionSpec):
    if M.kind == "box_union":
        for box in M.boxes:
            if len(box) != d.N:
                raise DomainError(f"box has {len(box)} sides, density has N = {d.N}")
            for (l, r), ax in zip(box, d.axes):
                if r <= ax.a or l >= ax.b:
                    raise DomainError("box lies outside S")


def c_axes(d: ProductDensity) -> float:
    out = 1.0
    for ax in d.axes:
        out *= ax.mass
    return out


# -- public measurements ----------------------------------------------------------

def mu_measure(d: ProductDensity, M: RegionSpec, n: int = DEFAULT_LEVEL) -> float:
    """mu(M) = int_M phi dx."""
    _check_inside(d, M)
    if M.kind == "halfspace_slice":
        return c_axes(d) * gauss_tail(M.lam)
    if M.kind == "slab_union":
        return c_axes(d) * math.fsum(_xN_mass(l, r) for l, r in M.intervals)
    if M.kind == "box_union":
        total = []
        for box in M.boxes:
            v = _xN_mass(*box[-1])
            for (l, r), ax in zip(box[:-1], d.axes):
                v *= _axis_piece(ax, l, r)
            total.append(v)
        return math.fsum(total)
    if M.kind == "graph":
        grid = density_grid(d, n)
        return _graph_terms(grid, _eval_graph(M, grid), M.lipschitz)[0]
    raise RegionError(f"unknown region kind {M.kind!r}")


def perimeter(d: ProductDensity, M: RegionSpec, n: int = DEFAULT_LEVEL) -> float:
    """Weighted perimeter of M relative to S."""
    _check_inside(d, M)
    if M.kind == "halfspace_slice":
        return c_axes(d) * math.exp(-0.5 * M.lam**2)
    if M.kind == "slab_union":
        return c_axes(d) * math.fsum(_xN_face(l) + _xN_face(r) for l, r in M.intervals)
    if M.kind == "box_union":
        total = []
        for box in M.boxes:
            pieces = [_axis_piece(ax, l, r) for (l, r), ax in zip(box[:-1], d.axes)]
            zN = _xN_mass(*box[-1])
            faceN = _xN_face(box[-1][0]) + _xN_face(box[-1][1])
            total.append(faceN * math.prod(pieces))
            for j, ((l, r), ax) in enumerate(zip(box[:-1], d.axes)):
                others = math.prod(p for i, p in enumerate(pieces) if i != j)
                total.append((_axis_face(ax, l) + _axis_face(ax, r)) * others * zN)
        return math.fsum(total)
    if M.kind == "graph":
        grid = density_grid(d, n)
        return _graph_terms(grid, _eval_graph(M, grid), M.lipschitz)[1]
    raise RegionError(f"unknown region kind {M.kind!r}")


def _measure_pair(d, M, n):
    """(mu, P_M, C) at one grid level; C is the x' mass the grid sees."""
    if M.kind == "graph":
        grid = density_grid(d, n)
        vol, per = _graph_terms(grid, _eval_graph(M, grid), M.lipschitz)
        return vol, per, grid.c_q
    return mu_measure(d, M), perimeter(d, M), c_axes(d)


# -- Theorem-2 style certificate -----------------------------------------------------

@dataclass(frozen=True)
class IsoCertificate:
    mu: float
    lambda_star: float
    P_M: float
    P_slice: float
    gap: float
    tol_geom: float
    passed: bool
    tol_geom_fine: Optional[float] = None

    def row(self, density_id, region_id):
        return [density_id, region_id, self.mu, self.lambda_star, self.P_M, self.P_slice,
                self.gap, self.tol_geom, self.passed]


ISO_HEADER = ["density_id", "region_id", "mu", "lambda_star", "P_M", "P_slice", "gap", "tol_geom", "pass"]


def _gap_at(d, M, n, perimeter_scale):
    mu, P, C = _measure_pair(d, M, n)
    if not (0.0 < mu < C * SQRT_2PI):
        raise DomainError(f"mu(M) = {mu:.6g} outside (0, mu(S))")
    lam = float(gauss_tail_inv(mu / C))
    P = perimeter_scale * P
    P_slice = C * math.exp(-0.5 * lam * lam)
    return mu, lam, P, P_slice


def isoperimetric_check(d: ProductDensity, M: RegionSpec, n: int = DEFAULT_LEVEL,
                        check_shrink: bool = False, perimeter_scale: float = 1.0) -> IsoCertificate:
    """Compare P_mu(M) with the perimeter of the slice of equal measure.

    The slice level solves ``mu(S_lam) = C F(lam) = mu(M)``, where ``C`` is
    the x' mass seen by the same grid.  For graph sets the gap is computed
    with ``n`` and ``2n - 1`` nodes per axis and ``tol_geom`` is twice their
    difference plus a relative noise floor; ``check_shrink`` adds a third
    level to report the next tolerance as ``tol_geom_fine``.
    ``perimeter_scale`` corrupts the perimeter on purpose (negative control).
    """
    if n % 2 == 0:
        raise DomainError("grid level must be odd")
    levels = [n, 2 * n - 1, 4 * n - 3] if M.kind == "graph" else [n]
    if M.kind == "graph" and not check_shrink:
        levels = levels[:2]
    results = [_gap_at(d, M, k, perimeter_scale) for k in levels]
    mu, lam, P, P_slice = results[min(1, len(results) - 1)]
    gaps = [r[2] - r[3] for r in results]
    floor = NOISE_REL * (abs(P) + abs(P_slice))
    tol = 2.0 * abs(gaps[1] - gaps[0]) + floor if len(gaps) > 1 else floor
    tol_fine = 2.0 * abs(gaps[2] - gaps[1]) + floor if len(gaps) > 2 else None
    gap = P - P_slice
    return IsoCertificate(mu, lam, P, P_slice, gap, tol, bool(gap >= -tol), tol_fine)


def volume_matched_graph(d: ProductDensity, profile: Callable, lam: float, n: int = DEFAULT_LEVEL,
                         lipschitz: float = 50.0, name: str = "graph") -> RegionSpec:
    """Graph set {x_N > profile(x') + s} with s chosen so mu(M) = mu(S_lam) on the grid."""
    grid = density_grid(d, n)
    base = _eval_graph(RegionSpec.graph(profile), grid)
    wr = grid.weights * grid.rho
    target = grid.c_q * gauss_tail(lam)
    f = lambda s: float(np.sum(wr * gauss_tail(base + s))) - target
    lo, hi = -1.0, 1.0
    while f(lo) < 0:
        lo *= 2.0
    while f(hi) > 0:
        hi *= 2.0
    s = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-15)
    return RegionSpec.graph(lambda x, _p=profile, _s=s: _p(x) + _s, lipschitz=lipschitz, name=name)


# -- pushforward chain ------------------------------------------------------------------

@dataclass(frozen=True)
class ChainCertificate:
    P_mu: float
    P_gauss_scaled: float
    slice_gauss: float
    link1: float
    link2: float
    tol1: float
    tol2: float
    passed: bool


def _chain_at(d, M, n):
    maps = d.axes
    N = d.N
    xgrid = density_grid(d, n)
    mu, P_mu = _graph_terms(xgrid, _eval_graph(M, xgrid), M.lipschitz)
    ygrid = gauss_grid(N, n)
    # pull the y grid back through the axis maps: v(y') = u(T^{-1} y')
    back = [np.asarray(m.inverse(y)) for m, y in zip(maps, ygrid.axes)]
    pts = np.stack(np.meshgrid(*back, indexing="ij"), axis=-1)
    V = np.asarray(M.u(pts), dtype=float).reshape(ygrid.rho.shape)
    _, P_g = _graph_terms(ygrid, V, math.inf)
    P_g /= SQRT_2PI  # the x_N factor of the Gaussian density
    lam = float(gauss_tail_inv(mu / SQRT_2PI ** (N - 1)))
    slice_g = math.exp(-0.5 * lam * lam) / SQRT_2PI
    scale = SQRT_2PI**N
    return P_mu, scale * P_g, slice_g, P_mu - scale * P_g, scale * (P_g - slice_g)


def pushforward_chain_check(d: ProductDensity, M: RegionSpec, n: int = DEFAULT_LEVEL) -> ChainCertificate:
    """Check P_mu(M) >= (2 pi)^{N/2} P_gamma(T M) >= (2 pi)^{N/2} P_gamma(H_lam).

    ``d`` must have transport maps on every x' axis and ``M`` must be a graph.
    """
    if d.form != "defphi":
        raise DomainError("the pushforward chain needs a density given by transport maps")
    if M.kind != "graph":
        raise DomainError("the pushforward chain is implemented for graph sets")
    coarse = _chain_at(d, M, n)
    fine = _chain_at(d, M, 2 * n - 1)
    P_mu, P_gs, slice_g, l1, l2 = fine
    floor = NOISE_REL * (abs(P_mu) + abs(P_gs))
    tol1 = 2.0 * abs(l1 - coarse[3]) + floor
    tol2 = 2.0 * abs(l2 - coarse[4]) + floor
    return ChainCertificate(P_mu, P_gs, slice_g, l1, l2, tol1, tol2, bool(l1 >= -tol1 and l2 >= -tol2))


# -- variations of the slice ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SeparatedDensity:
    """phi = rho(x') sigma(x_N) on a box Omega' x R.

    ``rho`` takes points of shape ``(..., N-1)``.  ``log_sigma`` defaults
    to the Gaussian ``-t^2/2``, whose tail integral is known in closed form;
    other profiles get their tail integral by quadrature.
    """

    rho: Callable
    box: tuple
    log_sigma: Optional[Callable] = None

    @classmethod
    def from_product(cls, d: ProductDensity, tail: float = MASS_TAIL):
        box = tuple(ax.truncation(tail) for ax in d.axes)

        def rho(x, _axes=d.axes):
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape[:-1])
            for i, ax in enumerate(_axes):
                out = out + ax.log_weight(x[..., i])
            return np.exp(out)

        return cls(rho, box)

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        if self.log_sigma is None:
            return np.exp(-0.5 * t * t)
        return np.exp(self.log_sigma(t))

    def sigma_tail(self, t):
        if self.log_sigma is None:
            return gauss_tail(t)
        return self._sigma_quad.right(t)

    @property
    def _sigma_quad(self):
        q = self.__dict__.get("_sq")
        if q is None:
            q = CumulativeQuadrature(self.log_sigma, -math.inf, math.inf)
            object.__setattr__(self, "_sq", q)
        return q


@dataclass(frozen=True, eq=False)
class VariationSpec:
    """Perturbation lam + eps*u(x') + s(eps) of the flat slice."""

    lam: float
    u: Callable
    grad_u: Optional[Callable] = None
    eps_list: tuple = (0.2, 0.1, 0.05)
    shift_tol: float = 1e-14
    panels: int = 48
    order: int = 10


@dataclass(frozen=True)
class VariationResult:
    eps: np.ndarray
    P: np.ndarray
    shifts: np.ndarray
    dP0: float
    d2P0: float
    stationary: bool


def _gl_box(box, panels, order):
    gx, gw = np.polynomial.legendre.leggauss(order)
    axes, ws = [], []
    for lo, hi in box:
        e = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(e)
        mid = 0.5 * (e[1:] + e[:-1])
        axes.append((mid[:, None] + half[:, None] * gx).ravel())
        ws.append((half[:, None] * gw).ravel())
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return pts, _outer(ws)


def _fd_grad(u, pts):
    h = np.finfo(float).eps ** 0.2
    out = []
    for i in range(pts.shape[-1]):
        e = np.zeros(pts.shape[-1])
        e[i] = h
        f = lambda t: np.asarray(u(t), dtype=float)
        out.append((-f(pts + 2 * e) + 8 * f(pts + e) - 8 * f(pts - e) + f(pts - 2 * e)) / (12 * h))
    return np.stack(out, axis=-1)


def _richardson(values, eps):
    """Extrapolate a sequence of O(eps^2) approximations on halving eps."""
    table = list(values)
    for k in range(1, len(table)):
        fac = 4.0**k
        table = [(fac * table[i + 1] - table[i]) / (fac - 1.0) for i in range(len(table) - 1)]
    return table[0]


def variation_curve(sd: SeparatedDensity, spec: VariationSpec, tol_var: float = 1e-5) -> VariationResult:
    """Perimeter of the volume-preserving perturbations of the slice at ``spec.lam``.

    Raises
    ------
    ConvergenceError
        If the volume constraint cannot be met to ``spec.shift_tol``.
    """
    eps_list = np.asarray(spec.eps_list, dtype=float)
    if np.any(eps_list <= 0) or not np.allclose(eps_list[1:], 0.5 * eps_list[:-1]):
        raise DomainError("eps_list must be positive and halving")
    pts, W = _gl_box(sd.box, spec.panels, spec.order)
    wr = W * sd.rho(pts)
    U = np.asarray(spec.u(pts), dtype=float)
    G = spec.grad_u(pts) if spec.grad_u is not None else _fd_grad(spec.u, pts)
    G2 = np.sum(np.asarray(G, dtype=float) ** 2, axis=-1)
    target = float(np.sum(wr * sd.sigma_tail(np.full(U.shape, spec.lam))))

    def volume(eps, s):
        return float(np.sum(wr * sd.sigma_tail(spec.lam + eps * U + s))) - target

    def shift(eps):
        if eps == 0.0:
            return 0.0
        span = 2.0 * abs(eps) * float(np.max(np.abs(U))) + 1e-3
        lo, hi = -span, span
        while volume(eps, lo) < 0:
            lo *= 2.0
        while volume(eps, hi) > 0:
            hi *= 2.0
        s = optimize.brentq(lambda t: volume(eps, t), lo, hi, xtol=spec.shift_tol, rtol=1e-15)
        if abs(volume(eps, s)) > max(spec.shift_tol, 1e-13 * target):
            raise ConvergenceError(f"volume constraint not met at eps = {eps:g}")
        return s

    def P(eps, s):
        return float(np.sum(wr * sd.sigma(spec.lam + eps * U + s) * np.sqrt(1.0 + eps * eps * G2)))

    eps_all = np.concatenate((-eps_list[::-1], [0.0], eps_list))
    shifts = np.array([shift(e) for e in eps_all])
    Ps = np.array([P(e, s) for e, s in zip(eps_all, shifts)])
    m = len(eps_list)
    P0 = Ps[m]
    d1 = [(Ps[m + 1 + k] - Ps[m - 1 - k]) / (2 * e) for k, e in enumerate(eps_list)]
    d2 = [(Ps[m + 1 + k] - 2 * P0 + Ps[m - 1 - k]) / (e * e) for k, e in enumerate(eps_list)]
    dP0 = _richardson(d1, eps_list)
    d2P0 = _richardson(d2, eps_list)
    return VariationResult(eps_all, Ps, shifts, dP0, d2P0, bool(abs(dP0) <= tol_var))


__all__ = [
    "ChainCertificate",
    "GaussReference",
    "ISO_HEADER",
    "IsoCertificate",
    "RegionSpec",
    "SeparatedDensity",
    "TensorGrid",
    "VariationResult",
    "VariationSpec",
    "density_grid",
    "gauss_grid",
    "isoperimetric_check",
    "mu_measure",
    "perimeter",
    "pushforward_chain_check",
    "variation_curve",
    "volume_matched_graph",
]
