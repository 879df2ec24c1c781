"""Distribution functions and weighted rearrangements of grid functions.

A :class:`GridFunction` holds nodal values on a tensor grid over a box
``G`` inside ``S`` together with nodal masses (trapezoid weights times the
density).  Its decreasing rearrangement ``u*`` on ``[0, mu(G)]`` is the step
function obtained by sorting nodes by ``|u|`` (descending, ties by node
index) and stacking their masses.  The weighted rearrangement is

    u_star(x_N) = u*( C_mu F(x_N) ),   x_N > lam,   C_mu F(lam) = mu(G),

a function of ``x_N`` alone on ``G_star = S' x (lam, inf)``.  Because
``F`` decreases, ``u_star`` is non-decreasing in ``x_N``: it is smallest
at the bottom face and carries its largest values toward infinity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .density import ProductDensity, c_mu
from .errors import DomainError, PreconditionError
from .isoperimetry import RegionSpec
from .spectral import dirichlet_left_eigenvalue
from .specfun import SQRT_2PI, gauss_tail, gauss_tail_inv

TAIL_MASS = 1e-10


def trapezoid_weights(x):
    w = np.empty_like(x)
    d = np.diff(x)
    w[0] = 0.5 * d[0]
    w[-1] = 0.5 * d[-1]
    w[1:-1] = 0.5 * (d[1:] + d[:-1])
    return w


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values on a box ``G`` with density-weighted nodal masses.

    ``open_faces`` lists ``(axis, side)`` pairs (side 0 = low, 1 = high)
    of faces that are truncations of an unbounded domain; they are not
    part of the boundary portion where functions must vanish.
    """

    density: ProductDensity
    axes: tuple
    values: np.ndarray
    open_faces: frozenset = frozenset()

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "open_faces", frozenset(self.open_faces))
        if len(axes) != self.density.N:
            raise DomainError(f"need {self.density.N} grid axes")
        if self.values.shape != tuple(a.size for a in axes):
            raise DomainError("values do not match the grid shape")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("values must be finite")
        for a in axes:
            if a.size < 3 or not np.all(np.diff(a) > 0):
                raise DomainError("grid axes must be increasing with at least 3 nodes")

    @classmethod
    def from_callable(cls, d: ProductDensity, box, n, fn: Callable, open_faces=()):
        n = (n,) * d.N if np.isscalar(n) else tuple(n)
        axes = tuple(np.linspace(l, r, k) for (l, r), k in zip(box, n))
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return cls(d, axes, np.asarray(fn(pts), dtype=float).reshape(n), frozenset(open_faces))

    def with_values(self, values):
        return GridFunction(self.density, self.axes, values, self.open_faces)

    @property
    def points(self):
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    @property
    def box(self):
        return tuple((float(a[0]), float(a[-1])) for a in self.axes)

    @property
    def masses(self) -> np.ndarray:
        m = self.__dict__.get("_masses")
        if m is None:
            w = trapezoid_weights(self.axes[0])
            for a in self.axes[1:]:
                w = np.multiply.outer(w, trapezoid_weights(a))
            with np.errstate(all="ignore"):
                phi = np.exp(self.density.log_phi(self.points))
            m = w * np.nan_to_num(phi, nan=0.0)
            if not m.sum() > 0:
                raise DomainError("grid carries zero mass")
            object.__setattr__(self, "_masses", m)
        return m

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def max_cell_mass(self) -> float:
        return float(self.masses.max())

    def gradient(self):
        g = np.gradient(self.values, *self.axes, edge_order=2)
        return list(g) if isinstance(g, (list, tuple)) else [g]

    def boundary_mask(self):
        """Nodes on the faces of G that are not open truncation faces."""
        mask = np.zeros(self.values.shape, dtype=bool)
        for ax in range(self.values.ndim):
            for side, idx in ((0, 0), (1, -1)):
                if (ax, side) in self.open_faces:
                    continue
                sl = [slice(None)] * self.values.ndim
                sl[ax] = idx
                mask[tuple(sl)] = True
        return mask


def distribution_function(f: GridFunction, t) -> float | np.ndarray:
    """m(t) = mu{|u| > t} as a sum of nodal masses."""
    a = np.abs(f.values).ravel()
    m = f.masses.ravel()
    order = np.argsort(a, kind="stable")
    a_sorted = a[order]
    tail = np.concatenate((np.cumsum(m[order][::-1])[::-1], [0.0]))
    t_arr = np.asarray(t, dtype=float)
    k = np.searchsorted(a_sorted, t_arr, side="right")
    out = tail[k]
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class RearrangedProfile:
    """Decreasing rearrangement as a step function plus its x_N profile."""

    cell_mass: np.ndarray  # masses in sorted order
    mass_axis: np.ndarray  # right ends of the steps, increasing to mu(G)
    ustar: np.ndarray  # non-increasing step values
    lam: float
    C_mu: float

    @property
    def total(self) -> float:
        return float(self.mass_axis[-1])

    def ustar_at(self, s):
        """u*(s), right-continuous; extended by its last value beyond mu(G)."""
        k = np.searchsorted(self.mass_axis, np.asarray(s, dtype=float), side="right")
        return self.ustar[np.clip(k, 0, self.ustar.size - 1)]

    def cumulative(self, s):
        """int_0^s u*(r) dr (exact for the step function)."""
        s = np.asarray(s, dtype=float)
        edges = np.concatenate(([0.0], self.mass_axis))
        acc = np.concatenate(([0.0], np.cumsum(self.cell_mass * self.ustar)))
        k = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, self.ustar.size - 1)
        return acc[k] + (np.minimum(s, edges[-1]) - edges[k]) * self.ustar[k]

    def s_of(self, xN):
        return self.C_mu * gauss_tail(np.asarray(xN, dtype=float))

    def ubigstar(self, xN):
        """u_star(x_N) = u*(C_mu F(x_N)) for x_N >= lam."""
        return self.ustar_at(self.s_of(xN))

    @property
    def t_max(self) -> float:
        """Truncation of G_star: the slice above it carries mass < TAIL_MASS * mu(G)."""
        return float(gauss_tail_inv(TAIL_MASS * self.total / self.C_mu))

    def superlevel_mass(self, t) -> float:
        """mu{u_star > t} from the x_N profile (monotone in x_N)."""
        if t < self.ustar[-1]:
            return self.total
        if t >= self.ustar[0]:
            return 0.0
        # first x_N above which u_star > t, by bisection on the monotone profile
        lo, hi = self.lam, self.t_max + 10.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.ubigstar(mid) > t:
                hi = mid
            else:
                lo = mid
        return float(self.s_of(hi))


def decreasing_rearrangement(f: GridFunction, C: Optional[float] = None) -> RearrangedProfile:
    """Sort |u| descending (ties by node index) and stack the nodal masses.

    ``C`` is the x' mass of S; by default that of the density.
    """
    a = np.abs(f.values).ravel()
    m = f.masses.ravel()
    order = np.argsort(-a, kind="stable")
    cell = m[order]
    total = float(cell.sum())
    if not total > 0:
        raise DomainError("domain has zero measure")
    C = c_mu(f.density) if C is None else C
    lam = float(gauss_tail_inv(min(total / C, SQRT_2PI * (1 - 1e-16))))
    return RearrangedProfile(cell, np.cumsum(cell), a[order], lam, C)


# -- inequality suite ---------------------------------------------------------------

def _check_membership(f: GridFunction, boundary_tol):
    if np.any(f.values < -boundary_tol):
        raise PreconditionError("function must be nonnegative")
    edge = f.boundary_mask()
    if edge.any() and np.max(np.abs(f.values[edge])) > boundary_tol:
        raise PreconditionError("function does not vanish on the boundary portion of G")


def dirichlet_energy(f: GridFunction) -> float:
    """int_G |Du|^2 dmu with centered-difference gradients."""
    g2 = sum(g * g for g in f.gradient())
    return float(np.sum(f.masses * g2))


def _coarsen(f: GridFunction):
    sl = tuple(slice(None, None, 2) for _ in f.axes)
    if any((a.size - 1) % 2 for a in f.axes):
        return None
    return GridFunction(f.density, tuple(a[::2] for a in f.axes), f.values[sl], f.open_faces)


def profile_energy(prof: RearrangedProfile, h: float, q: float = 2.0) -> float:
    """int_{G_star} |d u_star / dx_N|^q dmu from bin-averaged u*.

    x_N bins of width ``h`` start at lam; on each bin u* is averaged exactly
    over the matching mass interval, and the profile is differenced between
    bin midpoints (the first segment starts at (lam, u*(mu(G)))).
    """
    t = np.arange(prof.lam, prof.t_max + h, h)
    s = prof.s_of(t)
    s[0] = prof.total
    U = prof.cumulative(s)
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = (U[:-1] - U[1:]) / (s[:-1] - s[1:])
    keep = s[:-1] - s[1:] > 0
    mids = 0.5 * (t[:-1] + t[1:])[keep]
    avg = avg[keep]
    nodes = np.concatenate(([prof.lam], mids))
    vals = np.concatenate(([prof.ustar[-1]], avg))
    dt = np.diff(nodes)
    slope = np.diff(vals) / dt
    centre = 0.5 * (nodes[1:] + nodes[:-1])
    return float(prof.C_mu * np.sum(np.abs(slope) ** q * np.exp(-0.5 * centre * centre) * dt))


def x_spacing(f: GridFunction) -> float:
    return float(np.max(np.diff(f.axes[-1])))


@dataclass(frozen=True)
class GapCertificate:
    lhs: float
    rhs: float
    gap: float
    tol: float
    passed: bool


def polya_szego_gap(f: GridFunction, tol: Optional[float] = None,
                    boundary_tol: float = 1e-10) -> GapCertificate:
    """int_G |Du|^2 dmu against int_{G_star} |D u_star|^2 dmu.

    Without ``tol`` the tolerance is the change of both sides when the grid
    (for the left side) and the bin width (for the right side) double.
    """
    _check_membership(f, boundary_tol)
    prof = decreasing_rearrangement(f)
    h = x_spacing(f)
    lhs = dirichlet_energy(f)
    rhs = profile_energy(prof, h)
    if tol is None:
        coarse = _coarsen(f)
        err_l = abs(lhs - dirichlet_energy(coarse)) if coarse is not None else 0.0
        err_r = abs(rhs - profile_energy(prof, 2 * h))
        tol = err_l + err_r + 1e-12 * (lhs + rhs)
    gap = lhs - rhs
    return GapCertificate(lhs, rhs, gap, tol, bool(gap >= -tol))


@dataclass(frozen=True)
class PoincareCertificate:
    ratio: float
    K_bound: float
    tol: float
    passed: bool


def poincare_constant(lam: float, h: float, t_max: float) -> float:
    """Smallest Rayleigh quotient of int v'^2 e^{-t^2/2} / int v^2 e^{-t^2/2}, v(lam) = 0."""
    n = max(3, int(math.ceil((t_max - lam) / h)) + 1)
    rho = lambda x: np.exp(-0.5 * x[..., 0] ** 2)
    return dirichlet_left_eigenvalue(rho, (lam, t_max), n).kappa


def poincare_bound(f: GridFunction, tol: Optional[float] = None,
                   boundary_tol: float = 1e-10) -> PoincareCertificate:
    """Energy-to-mass ratio of u against the 1-D bound on (lam, inf)."""
    _check_membership(f, boundary_tol)
    l2 = float(np.sum(f.masses * f.values**2))
    if l2 <= 0:
        raise DomainError("zero function")
    prof = decreasing_rearrangement(f)
    h = x_spacing(f)
    ratio = dirichlet_energy(f) / l2
    t_max = prof.t_max
    K = poincare_constant(prof.lam, h, t_max)
    if tol is None:
        coarse = _coarsen(f)
        err_l = abs(ratio - dirichlet_energy(coarse) / float(np.sum(coarse.masses * coarse.values**2))) \
            if coarse is not None else 0.0
        err_k = abs(K - poincare_constant(prof.lam, 2 * h, t_max))
        tol = err_l + err_k + 1e-12 * (ratio + K)
    return PoincareCertificate(ratio, K, tol, bool(ratio >= K - tol))


@dataclass(frozen=True)
class HardyCertificate:
    lhs: float
    rhs: float
    mass: float
    passed: bool


def region_mask(f: GridFunction, E: RegionSpec) -> np.ndarray:
    """Grid nodes inside ``E``; raises unless E lies in G."""
    pts = f.points
    box = f.box
    xN = pts[..., -1]
    if E.kind == "slab_union":
        for l, r in E.intervals:
            if l < box[-1][0] or r > box[-1][1]:
                raise DomainError("slab is not contained in G")
        return np.any([(xN > l) & (xN < r) for l, r in E.intervals], axis=0)
    if E.kind == "box_union":
        inside = []
        for b in E.boxes:
            if any(l < gl or r > gr for (l, r), (gl, gr) in zip(b, box)):
                raise DomainError("box is not contained in G")
            inside.append(np.all([(pts[..., i] > l) & (pts[..., i] < r) for i, (l, r) in enumerate(b)], axis=0))
        return np.any(inside, axis=0)
    if E.kind == "halfspace_slice":
        if E.lam < box[-1][0]:
            raise DomainError("slice is not contained in G")
        return xN > E.lam
    if E.kind == "graph":
        return xN > np.asarray(E.u(pts[..., :-1]), dtype=float)
    raise DomainError(f"unknown region kind {E.kind!r}")


def hardy_check(f: GridFunction, E, tol: float = 1e-12) -> HardyCertificate:
    """int_E |f| dmu <= int_0^{mu(E)} f*(r) dr.

    ``E`` is a :class:`RegionSpec` or a boolean node mask.
    """
    mask = np.asarray(E, dtype=bool) if not isinstance(E, RegionSpec) else region_mask(f, E)
    if mask.shape != f.values.shape:
        raise DomainError("mask does not match the grid")
    m = f.masses
    lhs = float(np.sum(np.abs(f.values[mask]) * m[mask]))
    mass = float(np.sum(m[mask]))
    prof = decreasing_rearrangement(f)
    rhs = float(prof.cumulative(mass))
    return HardyCertificate(lhs, rhs, mass, bool(lhs <= rhs + tol * max(1.0, abs(rhs))))


def superlevel_mask(f: GridFunction, mass: float) -> np.ndarray:
    """Nodes carrying the largest |f| values, in rearrangement order, up to ``mass``."""
    a = np.abs(f.values).ravel()
    order = np.argsort(-a, kind="stable")
    csum = np.cumsum(f.masses.ravel()[order])
    take = order[: int(np.searchsorted(csum, mass * (1 + 1e-14), side="right"))]
    mask = np.zeros(a.size, dtype=bool)
    mask[take] = True
    return mask.reshape(f.values.shape)


def lp_norm(f: GridFunction, p: float) -> float:
    """||u||_{L^p(G, dmu)} from the nodal masses."""
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max())
    return float(np.sum(f.masses * a**p) ** (1.0 / p))


def profile_lp_norm(prof: RearrangedProfile, p: float, n: int = 20001) -> float:
    """||u_star||_{L^p(G_star, dmu)} by composite quadrature in x_N.

    Independent of the step-function sums: integrates C_mu u_star(t)^p
    exp(-t^2/2) on (lam, t_max) with a fine Simpson rule.
    """
    if math.isinf(p):
        return float(np.max(prof.ustar))
    if n % 2 == 0:
        n += 1
    t = np.linspace(prof.lam, prof.t_max, n)
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= (t[1] - t[0]) / 3.0
    vals = prof.ubigstar(t) ** p * np.exp(-0.5 * t * t)
    return float((prof.C_mu * np.sum(w * vals)) ** (1.0 / p))


__all__ = [
    "GapCertificate",
    "GridFunction",
    "HardyCertificate",
    "PoincareCertificate",
    "RearrangedProfile",
    "decreasing_rearrangement",
    "dirichlet_energy",
    "distribution_function",
    "hardy_check",
    "lp_norm",
    "poincare_bound",
    "poincare_constant",
    "polya_szego_gap",
    "profile_energy",
    "profile_lp_norm",
    "region_mask",
    "superlevel_mask",
]
