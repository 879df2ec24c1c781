"""Degenerate elliptic problems and their one-variable symmetrized comparison.

The problem is ``-div(A grad u) = phi f`` in a box ``G`` compactly inside
``S`` with ``u = 0`` on the boundary of ``G``, where the coefficient matrix
is sandwiched as ``phi |z|^2 <= z.A z <= C phi |z|^2``.  It is discretized
in flux form on a uniform grid (harmonic face averages for the diagonal
coefficients, symmetric cross stencils for the off-diagonal ones) and solved
by Jacobi-preconditioned conjugate gradients.

The symmetrized solution lives on ``G_star = S' x (lam, inf)`` and depends
on ``x_N`` only:

    v(x_N) = int_lam^{x_N} exp(r^2/2) I(r) dr,   I(r) = int_r^inf exp(-t^2/2) f_star(t) dt.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, sparse
from scipy.sparse.linalg import cg

from .density import ProductDensity, c_mu
from .errors import CoefficientError, ConvergenceError, DomainError
from .rearrangement import GridFunction, RearrangedProfile, decreasing_rearrangement
from .specfun import gauss_tail, gauss_tail_inv, gauss_tail_scaled

N_RHO = 20001
TAIL_MASS = 1e-10


# -- coefficient fields ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoefficientField:
    """A(x) = phi(x) * K(x) with K symmetric; ``K`` maps points (..., N) to (..., N, N)."""

    K: Callable
    name: str = "coefficient"

    @classmethod
    def phi_identity(cls):
        return cls(lambda x: np.broadcast_to(np.eye(x.shape[-1]), x.shape + (x.shape[-1],)).copy(),
                   name="phi*I")

    @classmethod
    def phi_diag(cls, diag: Sequence[float]):
        D = np.diag(np.asarray(diag, dtype=float))
        return cls(lambda x: np.broadcast_to(D, x.shape[:-1] + D.shape).copy(),
                   name="phi*diag(" + ",".join(f"{v:g}" for v in diag) + ")")

    @classmethod
    def phi_matrix(cls, M):
        M = np.asarray(M, dtype=float)
        if not np.allclose(M, M.T):
            raise CoefficientError("coefficient matrix must be symmetric")
        return cls(lambda x: np.broadcast_to(M, x.shape[:-1] + M.shape).copy(), name="phi*M")

    def matrices(self, x, phi):
        return phi[..., None, None] * np.asarray(self.K(x), dtype=float)


@dataclass(frozen=True, eq=False)
class EllipticProblem:
    """-div(A grad u) = phi f on a box G, u = 0 on its boundary."""

    density: ProductDensity
    box: tuple
    n: tuple
    coefficient: CoefficientField
    f: Callable
    C: float = 1.0

    def __post_init__(self):
        box = tuple((float(l), float(r)) for l, r in self.box)
        n = (int(self.n),) * len(box) if np.isscalar(self.n) else tuple(int(k) for k in self.n)
        d = self.density
        if len(box) != d.N or len(n) != d.N:
            raise DomainError(f"box and grid need {d.N} axes")
        for (l, r), ax in zip(box, d.axes):
            if not (ax.a < l < r < ax.b):
                raise DomainError("G must be compactly contained in S")
        if not box[-1][0] < box[-1][1] or any(k < 3 for k in n):
            raise DomainError("degenerate box or grid")
        if self.C < 1.0:
            raise CoefficientError("ellipticity constant must be >= 1")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "n", n)

    @property
    def axes(self):
        return tuple(np.linspace(l, r, k) for (l, r), k in zip(self.box, self.n))

    @property
    def points(self):
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def phi(self):
        return np.exp(self.density.log_phi(self.points))

    def f_values(self):
        return np.asarray(self.f(self.points), dtype=float).reshape(self.n)

    def f_grid(self) -> GridFunction:
        return GridFunction(self.density, self.axes, self.f_values())

    def refined(self, n):
        return EllipticProblem(self.density, self.box, n, self.coefficient, self.f, self.C)


def check_ellipticity(p: EllipticProblem, slack: float = 1e-12):
    """Eigenvalues of A/phi must lie in [1, C] at every node."""
    K = np.asarray(p.coefficient.K(p.points), dtype=float)
    if not np.allclose(K, np.swapaxes(K, -1, -2)):
        raise CoefficientError("coefficient matrix is not symmetric")
    ev = np.linalg.eigvalsh(K)
    lo, hi = float(ev.min()), float(ev.max())
    if lo < 1.0 - slack or hi > p.C * (1.0 + slack):
        raise CoefficientError(f"ellipticity sandwich violated: eigenvalues of A/phi in [{lo:.6g}, {hi:.6g}], C = {p.C:g}")
    return lo, hi


def _harmonic(a, b):
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 2.0 * a * b / (a + b)
    return np.where(a + b > 0, out, 0.0)


def assemble(p: EllipticProblem):
    """Symmetric stiffness matrix over all nodes (scaled by the cell volume)."""
    A = p.coefficient.matrices(p.points, p.phi())
    shape = p.n
    N = len(shape)
    h = [float(ax[1] - ax[0]) for ax in p.axes]
    vol = math.prod(h)
    idx = np.arange(math.prod(shape)).reshape(shape)
    rows, cols, vals = [], [], []

    def sl(ax, lo, hi):
        s = [slice(None)] * N
        s[ax] = slice(lo, hi)
        return tuple(s)

    for k in range(N):
        a = A[..., k, k]
        face = _harmonic(a[sl(k, None, -1)], a[sl(k, 1, None)]) * vol / h[k] ** 2
        i = idx[sl(k, None, -1)].ravel()
        j = idx[sl(k, 1, None)].ravel()
        w = face.ravel()
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        vals += [w, w, -w, -w]
    # cross terms d_k(a_kl d_l u) + d_l(a_lk d_k u), symmetric 4-point stencils
    for k in range(N):
        for l in range(k + 1, N):
            a = A[..., k, l]
            scale = vol / (4.0 * h[k] * h[l])
            for sk, sl_ in ((1, 1), (1, -1)):
                # couples node i with i + sk e_k + sl e_l through a at i + sk e_k and i + sl e_l
                src = [slice(None)] * N
                dst = [slice(None)] * N
                via_k = [slice(None)] * N
                via_l = [slice(None)] * N
                src[k], dst[k] = (slice(None, -1), slice(1, None))
                if sl_ == 1:
                    src[l], dst[l] = slice(None, -1), slice(1, None)
                else:
                    src[l], dst[l] = slice(1, None), slice(None, -1)
                via_k[k] = dst[k]
                via_k[l] = src[l]
                via_l[k] = src[k]
                via_l[l] = dst[l]
                coef = -sk * sl_ * scale * (a[tuple(via_k)] + a[tuple(via_l)])
                i = idx[tuple(src)].ravel()
                j = idx[tuple(dst)].ravel()
                c = coef.ravel()
                rows += [i, j, i, j]
                cols += [j, i, i, j]
                vals += [c, c, -c, -c]
    n_all = idx.size
    K = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n_all, n_all))
    return K, vol


@dataclass(frozen=True)
class Solution:
    u: GridFunction
    iterations: int
    residual: float
    energy: float
    work: float


def solve_elliptic(p: EllipticProblem, tol: float = 1e-10, maxiter: Optional[int] = None) -> Solution:
    """Discrete solution with zero boundary values.

    ``energy`` is the discrete ``int A grad u . grad u dx`` and ``work`` the
    discrete ``int f u dmu``; they agree up to the solver tolerance.

    Raises
    ------
    CoefficientError
        If the ellipticity sandwich fails at some node.
    ConvergenceError
        If conjugate gradients stop before reaching ``tol``.
    """
    check_ellipticity(p)
    K, vol = assemble(p)
    shape = p.n
    interior = np.zeros(shape, dtype=bool)
    interior[tuple(slice(1, -1) for _ in shape)] = True
    inner = interior.ravel()
    Ki = K[inner][:, inner].tocsr()
    rhs_full = (p.phi() * p.f_values() * vol).ravel()
    b = rhs_full[inner]
    u_full = np.zeros(inner.size)
    if np.any(b != 0):
        diag = Ki.diagonal()
        M = sparse.diags(1.0 / diag)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = cg(Ki, b, rtol=tol, atol=0.0, maxiter=maxiter or 20 * b.size, M=M, callback=cb)
        if info != 0:
            raise ConvergenceError(f"conjugate gradients stopped with info = {info}")
        u_full[inner] = x
        iters = count[0]
    else:
        iters = 0
    res = float(np.linalg.norm(K[inner] @ u_full - b) / max(np.linalg.norm(b), 1e-300))
    energy = float(u_full @ (K @ u_full))
    work = float(rhs_full @ u_full)
    ug = GridFunction(p.density, p.axes, u_full.reshape(shape))
    return Solution(ug, iters, res, energy, work)


# -- symmetrized solution ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SymmetrizedSolution:
    """v on [lam, t_max] with v' stored directly; ``unbounded`` flags a divergent sup."""

    lam: float
    C_mu: float
    fstar: RearrangedProfile
    rho: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    unbounded: bool

    def v_at(self, t):
        return np.interp(t, self.rho, self.v)

    def inner(self, r):
        """I(r) = int_r^inf exp(-t^2/2) f_star(t) dt."""
        s = self.C_mu * gauss_tail(np.asarray(r, dtype=float))
        return self.fstar.cumulative(s) / self.C_mu

    def fstar_at(self, t):
        return self.fstar.ubigstar(t)


def _scaled_inner(prof: RearrangedProfile, C: float, r):
    """exp(r^2/2) I(r), summed over the x_N pieces where f_star is constant."""
    # piece k carries value ustar[k] on (xi[k+1], xi[k]) in x_N, with xi decreasing in k
    xi_lo = gauss_tail_inv(np.clip(prof.mass_axis / C, 1e-300, None))
    xi_hi = np.concatenate(([math.inf], xi_lo[:-1]))
    # full pieces above xi_lo[k]: sum_j<k ustar_j (F(xi_lo_j) - F(xi_hi_j))
    piece = prof.ustar * (gauss_tail(xi_lo) - gauss_tail(xi_hi))
    above = np.concatenate(([0.0], np.cumsum(piece)))
    r = np.asarray(r, dtype=float)
    # piece containing r: the largest k with xi_lo[k] <= r
    k = np.searchsorted(-xi_lo, -r, side="left")
    k = np.clip(k, 0, xi_lo.size - 1)
    hi = xi_hi[k]
    partial = gauss_tail_scaled(r) - np.where(np.isinf(hi), 0.0,
                                              gauss_tail_scaled(np.where(np.isinf(hi), 0.0, hi))
                                              * np.exp(0.5 * (r * r - np.where(np.isinf(hi), 0.0, hi) ** 2)))
    return np.exp(0.5 * r * r) * above[k] + prof.ustar[k] * partial


def symmetrized_solution(d: ProductDensity, massG: float, f: GridFunction, n_rho: int = N_RHO,
                         C: Optional[float] = None) -> SymmetrizedSolution:
    """Build v from the rearrangement of ``f`` for a domain of measure ``massG``."""
    if not massG > 0:
        raise DomainError("mu(G) must be positive")
    C = c_mu(d) if C is None else C
    prof = decreasing_rearrangement(f, C)
    # use the requested mass even if the grid total differs slightly
    lam = float(gauss_tail_inv(massG / C))
    prof = RearrangedProfile(prof.cell_mass, prof.mass_axis, prof.ustar, lam, C)
    t_max = float(gauss_tail_inv(TAIL_MASS * massG / C))
    if n_rho % 2 == 0:
        n_rho += 1
    rho = np.linspace(lam, t_max, n_rho)
    dv = _scaled_inner(prof, C, rho)
    v = integrate.cumulative_simpson(dv, x=rho, initial=0.0)
    # sup v is finite only if exp(r^2/2) I(r) is integrable at infinity; since
    # exp(r^2/2) F(r) ~ 1/r, any f_star bounded away from 0 near the top diverges
    unbounded = bool(prof.ustar[0] > 0)
    return SymmetrizedSolution(lam, C, prof, rho, v, dv, unbounded)


@dataclass(frozen=True)
class LinfBound:
    bound: float
    independent: float
    unbounded: bool


def linf_bound(sym: SymmetrizedSolution) -> LinfBound:
    """sup v on the truncated profile, with an independent evaluation.

    The second value integrates ``(1/C) exp(r^2/2) int_0^{C F(r)} f*`` by
    adaptive quadrature, using partial sums of the step function u*.
    """
    prof, C = sym.fstar, sym.C_mu

    def integrand(r):
        s = C * float(gauss_tail(r))
        cum = float(prof.cumulative(s))
        if s <= 0 or cum == 0.0:
            return 0.0
        return float(gauss_tail_scaled(r)) * cum / s

    breaks = np.linspace(sym.lam, sym.rho[-1], 65)
    total = 0.0
    # the integrand has a kink at every step of u*; quad's roundoff notice there is expected
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(breaks[:-1], breaks[1:]):
            val, _ = integrate.quad(integrand, a, b, epsabs=1e-12, epsrel=1e-11, limit=400)
            total += val
    return LinfBound(float(sym.v[-1]), total, sym.unbounded)


# -- comparison certificate ------------------------------------------------------------

@dataclass(frozen=True)
class LevelMetrics:
    max_diff: float
    lhs: dict
    rhs: dict
    u_max: float
    bound: float


@dataclass(frozen=True)
class ComparisonCertificate:
    pointwise_pass: bool
    gradient_pass: dict
    lhs: dict
    rhs: dict
    max_violation: float
    tol_pointwise: float
    tol_gradient: dict
    linf_pass: bool
    bound: float
    u_max: float

    @property
    def passed(self):
        return self.pointwise_pass and all(self.gradient_pass.values()) and self.linf_pass

    def rows(self, problem_id, grid_h):
        out = []
        for q in self.lhs:
            out.append([problem_id, grid_h, self.pointwise_pass, q, self.lhs[q], self.rhs[q],
                        self.rhs[q] - self.lhs[q]])
        return out


PDE_HEADER = ["problem_id", "grid_h", "pointwise_pass", "q", "lhs", "rhs", "margin"]


def _level(p: EllipticProblem, q_list, tol, v_scale):
    sol = solve_elliptic(p, tol)
    u = sol.u
    C = c_mu(p.density)
    mass = u.total_mass
    sym = symmetrized_solution(p.density, mass, p.f_grid(), C=C)
    uprof = decreasing_rearrangement(u, C)
    # one-cell-mass slack: compare u* one cell further down the mass axis
    s = C * gauss_tail(sym.rho) + u.max_cell_mass
    ustar = uprof.ustar_at(s)
    v = v_scale * sym.v
    max_diff = float(np.max(ustar - v))
    g = u.gradient()
    gnorm = np.sqrt(sum(x * x for x in g))
    lhs, rhs = {}, {}
    w = np.exp(-0.5 * sym.rho**2)
    for q in q_list:
        lhs[q] = float(np.sum(u.masses * gnorm**q))
        rhs[q] = float(C * integrate.simpson(np.abs(v_scale * sym.dv) ** q * w, x=sym.rho))
    bound = v_scale * float(sym.v[-1])
    return LevelMetrics(max_diff, lhs, rhs, float(np.max(np.abs(u.values))), bound)


def comparison_certificate(p: EllipticProblem, d: Optional[ProductDensity] = None,
                           q_list=(0.5, 1.0, 2.0), tol: float = 1e-10,
                           v_scale: float = 1.0) -> ComparisonCertificate:
    """Pointwise, gradient and sup-norm comparison of u with v.

    Every quantity is computed on the grid of ``p`` and on the grid with
    half as many intervals per axis; tolerances are twice the change.
    ``v_scale`` corrupts v on purpose (negative control).
    """
    if d is not None and d is not p.density:
        p = EllipticProblem(d, p.box, p.n, p.coefficient, p.f, p.C)
    for q in q_list:
        if not 0 < q <= 2:
            raise DomainError("q must lie in (0, 2]")
    if any((k - 1) % 2 for k in p.n):
        raise DomainError("grid sizes must be odd so the coarse level nests")
    fine = _level(p, q_list, tol, v_scale)
    coarse = _level(p.refined(tuple((k + 1) // 2 for k in p.n)), q_list, tol, v_scale)
    scale = max(abs(fine.bound), 1e-300)
    tol_point = 2.0 * abs(fine.max_diff - coarse.max_diff) + 1e-9 * scale
    pointwise = fine.max_diff <= tol_point
    grad_pass, tol_grad = {}, {}
    for q in q_list:
        m_f = fine.rhs[q] - fine.lhs[q]
        m_c = coarse.rhs[q] - coarse.lhs[q]
        tol_grad[q] = 2.0 * abs(m_f - m_c) + 1e-9 * (fine.rhs[q] + fine.lhs[q])
        grad_pass[q] = bool(m_f >= -tol_grad[q])
    linf = fine.u_max <= fine.bound + tol_point
    return ComparisonCertificate(bool(pointwise), grad_pass, fine.lhs, fine.rhs,
                                 max(0.0, fine.max_diff), tol_point, tol_grad, bool(linf),
                                 fine.bound, fine.u_max)


__all__ = [
    "CoefficientField",
    "ComparisonCertificate",
    "EllipticProblem",
    "LinfBound",
    "PDE_HEADER",
    "Solution",
    "SymmetrizedSolution",
    "assemble",
    "check_ellipticity",
    "comparison_certificate",
    "linf_bound",
    "solve_elliptic",
    "symmetrized_solution",
]
