"""Log-concavity constant of an axial profile and weighted Neumann eigenvalues.

``tau`` is the supremum of ``(s'/s)^2 - s''/s = -(log s)''`` for a positive
profile ``s``.  ``kappa1`` is the first nontrivial eigenvalue of

    -div(rho grad v) = kappa rho v   on a box,   rho dv/dn = 0 on its boundary,

discretized with vertex-centered finite differences: face weights are
harmonic means of ``rho``, the mass matrix is lumped (``rho`` times the
dual-cell volume).  The constant mode is deflated and the next eigenpair
found by shifted inverse iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import splu

from .density import central_diff
from .errors import ConvergenceError, DomainError

# second differences balance truncation and rounding at eps**(1/6)
_D2_SCALE = np.finfo(float).eps ** (1 / 6 - 1 / 5)


# -- tau ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SigmaProfile:
    """Positive axial profile on a window.

    Give either ``log_sigma`` (preferred: tau is then ``-(log s)''``) or
    ``sigma`` with optional analytic ``d1``/``d2``.
    """

    sigma: Optional[Callable] = None
    log_sigma: Optional[Callable] = None
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    window: tuple = (-8.0, 8.0)
    name: str = "sigma"

    def __post_init__(self):
        if self.sigma is None and self.log_sigma is None:
            raise DomainError("need sigma or log_sigma")
        if not self.window[0] < self.window[1]:
            raise DomainError("empty window")

    @classmethod
    def gaussian(cls, c=0.5, window=(-8.0, 8.0)):
        """s(t) = exp(-c t^2)."""
        return cls(
            sigma=lambda t: np.exp(-c * np.asarray(t, dtype=float) ** 2),
            d1=lambda t: -2 * c * t * np.exp(-c * np.asarray(t, dtype=float) ** 2),
            d2=lambda t: (4 * c * c * t * t - 2 * c) * np.exp(-c * np.asarray(t, dtype=float) ** 2),
            window=window,
            name=f"gauss(c={c:g})",
        )

    def expression(self, t):
        t = np.asarray(t, dtype=float)
        if self.d1 is not None and self.d2 is not None:
            s = np.asarray(self.sigma(t), dtype=float)
            if np.any(s <= 0):
                raise DomainError("sigma must be positive")
            return (self.d1(t) / s) ** 2 - self.d2(t) / s
        if self.log_sigma is not None:
            return -central_diff(self.log_sigma, t, 2, _D2_SCALE)
        s = np.asarray(self.sigma(t), dtype=float)
        if np.any(s <= 0):
            raise DomainError("sigma must be positive")
        return (central_diff(self.sigma, t, 1) / s) ** 2 - central_diff(self.sigma, t, 2, _D2_SCALE) / s


@dataclass(frozen=True)
class TauResult:
    tau: float
    argmax: float
    unbounded_trend: bool


def tau_sup(s: SigmaProfile, n: int = 4001) -> TauResult:
    """Windowed sup of ``(s'/s)^2 - s''/s`` with golden-section refinement.

    ``unbounded_trend`` is set when the maximum sits on the window edge and
    the expression is still growing there.
    """
    lo, hi = s.window
    t = np.linspace(lo, hi, n)
    if s.sigma is not None and np.any(np.asarray(s.sigma(t)) <= 0):
        raise DomainError("sigma must be positive on the window")
    e = np.asarray(s.expression(t), dtype=float)
    k = int(np.argmax(e))
    best, arg = float(e[k]), float(t[k])
    noise = 1e-9 * (1.0 + abs(best))
    # growth at an edge is judged against a point 5% of the window inside
    m = max(1, n // 20)
    grow = 1e-6 * (1.0 + abs(best))
    trend = (k == 0 and e[0] > e[m] + grow) or (k == n - 1 and e[-1] > e[-1 - m] + grow)
    if 0 < k < n - 1 and (e[k] > e[k - 1] + noise or e[k] > e[k + 1] + noise):
        f = lambda x: -float(s.expression(np.array([x]))[0])
        r = minimize_scalar(f, bracket=(t[k - 1], t[k], t[k + 1]), method="golden",
                            options={"xtol": 1e-10})
        if -r.fun > best:
            best, arg = float(-r.fun), float(r.x)
    return TauResult(best, arg, bool(trend))


# -- weighted Neumann problem -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class WeightedNeumannProblem:
    """Weight ``rho`` on a box (1 or 2 axes) with ``n`` nodes per axis.

    ``rho`` is a callable on points of shape ``(..., d)`` or an array of
    node values.
    """

    box: tuple
    n: tuple
    rho: object

    def __post_init__(self):
        box = tuple((float(l), float(r)) for l, r in self.box)
        n = (int(self.n),) * len(box) if np.isscalar(self.n) else tuple(int(k) for k in self.n)
        if len(box) not in (1, 2) or len(n) != len(box):
            raise DomainError("box must have one or two axes, with a node count for each")
        if any(k < 3 for k in n):
            raise DomainError("need at least 3 nodes per axis")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "n", n)

    @property
    def axes(self):
        return tuple(np.linspace(l, r, k) for (l, r), k in zip(self.box, self.n))

    @property
    def h(self):
        return tuple(float(a[1] - a[0]) for a in self.axes)

    def rho_nodes(self):
        if callable(self.rho):
            pts = np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)
            vals = np.asarray(self.rho(pts), dtype=float).reshape(self.n)
        else:
            vals = np.asarray(self.rho, dtype=float).reshape(self.n)
        if not np.all(vals > 0) or not np.all(np.isfinite(vals)):
            raise DomainError("rho must be finite and positive at every node")
        return vals

    def resolution(self):
        """Largest relative change of rho across one cell."""
        r = self.rho_nodes()
        worst = 0.0
        for ax in range(r.ndim):
            a = np.moveaxis(r, ax, 0)
            diff = np.abs(np.diff(a, axis=0)) / np.maximum(a[1:], a[:-1])
            worst = max(worst, float(diff.max()))
        return worst


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


def assemble(p: WeightedNeumannProblem):
    """Stiffness K and lumped mass diagonal for the Neumann problem."""
    r = p.rho_nodes()
    shape = r.shape
    idx = np.arange(r.size).reshape(shape)
    h = p.h
    cell = math.prod(h)
    rows, cols, vals = [], [], []
    for ax in range(r.ndim):
        lo = [slice(None)] * r.ndim
        hi = [slice(None)] * r.ndim
        lo[ax] = slice(None, -1)
        hi[ax] = slice(1, None)
        face = _harmonic(r[tuple(lo)], r[tuple(hi)])
        # dual-face area: half-width at boundary nodes of the other axes
        area = np.ones_like(face) * cell / h[ax] ** 2
        for other in range(r.ndim):
            if other == ax:
                continue
            sl = [slice(None)] * r.ndim
            for end in (0, -1):
                sl[other] = end
                area[tuple(sl)] *= 0.5
        wgt = (face * area).ravel()
        i = idx[tuple(lo)].ravel()
        j = idx[tuple(hi)].ravel()
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        vals += [wgt, wgt, -wgt, -wgt]
    K = sparse.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(r.size, r.size))
    vol = np.full(shape, cell)
    for ax in range(r.ndim):
        sl = [slice(None)] * r.ndim
        for end in (0, -1):
            sl[ax] = end
            vol[tuple(sl)] *= 0.5
    return K, (r * vol).ravel()


@dataclass(frozen=True)
class EigenResult:
    kappa: float
    vector: np.ndarray
    iterations: int


def _inverse_iteration(K, m, deflate, tol, max_iter, seed=0):
    n = m.size
    shift = 1e-3 * float(np.median(K.diagonal() / m))
    lu = splu((K + shift * sparse.diags(m)).tocsc())
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    one_mass = m.sum()

    def project(x):
        return x - (m @ x) / one_mass if deflate else x

    v = project(v)
    kappa_old = math.inf
    for it in range(1, max_iter + 1):
        v = project(lu.solve(m * v))
        v /= math.sqrt(v @ (m * v))
        kappa = float(v @ (K @ v))
        if abs(kappa - kappa_old) <= tol * max(abs(kappa), 1e-300):
            return EigenResult(kappa, v, it)
        kappa_old = kappa
    raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps")


def kappa1(p: WeightedNeumannProblem, tol: float = 1e-13, max_iter: int = 5000) -> EigenResult:
    """First nontrivial eigenvalue of the discrete weighted Neumann problem.

    The returned value is the Rayleigh quotient ``v.K v / v.M v`` of the
    converged vector.
    """
    K, m = assemble(p)
    return _inverse_iteration(K, m, True, tol, max_iter)


def dirichlet_left_eigenvalue(rho: Callable, interval, n: int, tol: float = 1e-13,
                              max_iter: int = 5000) -> EigenResult:
    """Smallest eigenvalue on an interval with v = 0 at the left end, natural at the right."""
    p = WeightedNeumannProblem((interval,), (n,), rho)
    K, m = assemble(p)
    K = K[1:, 1:].tocsc()
    return _inverse_iteration(K, m[1:], False, tol, max_iter)


# -- stability ---------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityReport:
    kappa1: float
    tau: float
    margin: float
    satisfied: bool
    tol_spec: float
    truncation_delta: float
    tau_unbounded: bool

    def row(self, rho_id, sigma_id, domain, h):
        return [rho_id, sigma_id, domain, h, self.kappa1, self.tau, self.margin, self.satisfied]


STABILITY_HEADER = ["rho_id", "sigma_id", "domain", "h", "kappa1", "tau", "margin", "satisfied"]


def stability_report(rho: Callable, sigma: SigmaProfile, box, n, unbounded: bool = False,
                     extend: float = 2.0) -> StabilityReport:
    """Compare kappa1 of ``rho`` on ``box`` with tau of ``sigma``.

    kappa1 is computed with ``n`` and ``2n - 1`` nodes per axis; tol_spec is
    twice their difference.  With ``unbounded`` the box is a truncation of
    an infinite cross-section and is also solved with every side pushed out
    by ``extend`` (same spacing); the change is added to tol_spec.
    """
    n = (n,) * len(box) if np.isscalar(n) else tuple(n)
    coarse = kappa1(WeightedNeumannProblem(box, n, rho)).kappa
    fine_n = tuple(2 * k - 1 for k in n)
    fine_p = WeightedNeumannProblem(box, fine_n, rho)
    if fine_p.resolution() >= 0.5:
        raise DomainError("grid does not resolve rho (relative change per cell >= 0.5)")
    fine = kappa1(fine_p).kappa
    tol_spec = 2.0 * abs(fine - coarse)
    delta = 0.0
    if unbounded:
        wide = tuple((l - extend, r + extend) for l, r in box)
        wide_n = tuple(k + 2 * int(round(extend / hh)) for k, hh in zip(fine_n, fine_p.h))
        delta = abs(kappa1(WeightedNeumannProblem(wide, wide_n, rho)).kappa - fine)
        tol_spec += delta
    t = tau_sup(sigma)
    margin = fine - t.tau
    ok = margin >= -tol_spec and not t.unbounded_trend
    return StabilityReport(fine, t.tau, margin, bool(ok), tol_spec, delta, t.unbounded_trend)


__all__ = [
    "EigenResult",
    "STABILITY_HEADER",
    "SigmaProfile",
    "StabilityReport",
    "TauResult",
    "WeightedNeumannProblem",
    "assemble",
    "dirichlet_left_eigenvalue",
    "kappa1",
    "stability_report",
    "tau_sup",
]
