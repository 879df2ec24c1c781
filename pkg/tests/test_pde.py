import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gausslike.cli import data_from_expr
from gausslike.density import ProductDensity, gaussian
from gausslike.errors import CoefficientError, DomainError
from gausslike.pde import (
    CoefficientField,
    EllipticProblem,
    comparison_certificate,
    linf_bound,
    solve_elliptic,
    symmetrized_solution,
)
from gausslike.rearrangement import GridFunction

D = ProductDensity((gaussian(),))
BOX = [(-2.0, 2.0), (-1.0, 2.0)]
ONE = lambda x: np.ones(x.shape[:-1])

# mpmath at 30 digits: mu(G) = 1 for the two-dimensional Gaussian weight
LAM_MASS_ONE = 0.997937046825731245852945634779
V_MASS_ONE = {
    1.0: 0.00135336932455053693120304282198,
    2.0: 0.524649922209543755251508479993,
    3.0: 0.881798189296975966584849025255,
}


def _problem(n=41, f=ONE, coef=None, C=1.0, box=BOX):
    return EllipticProblem(D, box, n, coef or CoefficientField.phi_identity(), f, C)


def test_zero_data_gives_zero():
    s = solve_elliptic(_problem(f=lambda x: np.zeros(x.shape[:-1])))
    assert s.iterations == 0 and np.all(s.u.values == 0.0)


def _manufactured_error(n):
    # u = sin(pi x) sin(pi y) on the unit square, A = phi I, so phi f = -div(phi grad u)
    box = [(0.0, 1.0), (0.0, 1.0)]

    def f(x):
        a, b = np.pi * x[..., 0], np.pi * x[..., 1]
        lap = -2 * np.pi**2 * np.sin(a) * np.sin(b)
        grad = np.stack([np.pi * np.cos(a) * np.sin(b), np.pi * np.sin(a) * np.cos(b)], axis=-1)
        # grad log phi = (-x, -y) for the Gaussian weight on both axes
        return -(lap + np.sum(-x * grad, axis=-1))

    p = _problem(n, f, box=box)
    u = solve_elliptic(p, tol=1e-13).u.values
    X = p.points
    exact = np.sin(np.pi * X[..., 0]) * np.sin(np.pi * X[..., 1])
    return float(np.max(np.abs(u - exact)))


def test_manufactured_solution_converges_at_second_order():
    e1, e2 = _manufactured_error(33), _manufactured_error(65)
    assert math.log2(e1 / e2) >= 1.8


def test_linearity_in_the_data():
    rng_f = data_from_expr("random(3)", 4)
    u1 = solve_elliptic(_problem(f=rng_f), tol=1e-12).u.values
    u2 = solve_elliptic(_problem(f=lambda x: 2 * rng_f(x)), tol=1e-12).u.values
    assert np.max(np.abs(u2 - 2 * u1)) <= 1e-9 * np.max(np.abs(u1))


def test_energy_equals_work():
    s = solve_elliptic(_problem(61, data_from_expr("bump(0.2, 0.5, 0.7)", 0)), tol=1e-12)
    assert abs(s.energy - s.work) <= 1e-9 * s.work


def test_nonnegative_data_gives_nonnegative_solution():
    co = CoefficientField.phi_diag([1.0, 2.0])
    s = solve_elliptic(_problem(51, data_from_expr("bump(-0.5, 0.0, 0.6)", 0), co, C=2.0))
    assert s.u.values.min() >= -1e-12


def test_ellipticity_is_checked():
    with pytest.raises(CoefficientError):
        solve_elliptic(_problem(coef=CoefficientField.phi_diag([1.0, 3.0]), C=2.0))
    with pytest.raises(CoefficientError):
        solve_elliptic(_problem(coef=CoefficientField.phi_diag([0.5, 1.0]), C=2.0))
    with pytest.raises(CoefficientError):
        CoefficientField.phi_matrix([[1.0, 0.2], [0.0, 1.0]])
    with pytest.raises(CoefficientError):
        _problem(C=0.5)


def test_box_must_sit_inside_the_support():
    from gausslike.density import power
    with pytest.raises(DomainError):
        EllipticProblem(ProductDensity((power(2),)), [(0.0, 1.0), (0.0, 1.0)], 11,
                        CoefficientField.phi_identity(), ONE)


def _sym_for_unit_mass():
    f = GridFunction.from_callable(D, [(-3.0, 3.0), (-2.0, 3.0)], 61, ONE)
    return symmetrized_solution(D, 1.0, f)


def test_symmetrized_solution_matches_oracle():
    sym = _sym_for_unit_mass()
    assert sym.lam == pytest.approx(LAM_MASS_ONE, abs=1e-12)
    for t, v in V_MASS_ONE.items():
        assert abs(float(sym.v_at(t)) - v) <= 1e-7
    assert sym.unbounded


def test_symmetrized_solution_solves_its_ode():
    # (exp(-t^2/2) v')' = -exp(-t^2/2) f_star with f_star = 1
    sym = _sym_for_unit_mass()
    t = sym.rho
    flux = np.exp(-0.5 * t**2) * sym.dv
    dflux = np.gradient(flux, t)
    interior = slice(5, -5)
    assert np.max(np.abs(dflux[interior] + np.exp(-0.5 * t[interior] ** 2))) <= 1e-6
    assert sym.v[0] == 0.0 and np.all(np.diff(sym.v) >= 0)


def test_linf_bound_routes_agree():
    for expr, seed in [("one", 0), ("bump(0.0, 0.5, 0.8)", 0), ("random(3)", 7)]:
        f = data_from_expr(expr, seed)
        g = GridFunction.from_callable(D, BOX, 61, lambda x: np.abs(f(x)))
        sym = symmetrized_solution(D, g.total_mass, g)
        b = linf_bound(sym)
        assert abs(b.bound - b.independent) <= 1e-6 * max(1.0, abs(b.bound))


COEFS = [(CoefficientField.phi_identity(), 1.0),
         (CoefficientField.phi_diag([1.0, 2.0]), 2.0),
         (CoefficientField.phi_matrix([[1.5, 0.5], [0.5, 1.5]]), 2.0)]


@pytest.mark.parametrize("ci", range(3))
@pytest.mark.parametrize("expr", ["one", "bump(0.3, 0.4, 0.8)", "random(3)"])
def test_comparison_corpus(ci, expr):
    co, C = COEFS[ci]
    cert = comparison_certificate(_problem(101, data_from_expr(expr, 11), co, C))
    assert cert.passed, (cert.max_violation, cert.tol_pointwise, cert.lhs, cert.rhs)


def test_negative_control_is_caught():
    p = EllipticProblem(D, [(-5.0, 5.0), (0.0, 5.0)], 101, CoefficientField.phi_identity(), ONE)
    assert comparison_certificate(p).passed
    assert not comparison_certificate(p, v_scale=0.9).pointwise_pass


def test_even_grid_is_rejected():
    with pytest.raises(DomainError):
        comparison_certificate(_problem(40))


@settings(max_examples=8)
@given(st.integers(0, 2**31 - 1))
def test_comparison_on_random_data(seed):
    cert = comparison_certificate(_problem(61, data_from_expr("random(2)", seed)))
    assert cert.passed


def test_violation_shrinks_at_least_linearly():
    # near a half space slice u_star - v is a first-row artifact of size O(h)
    box = [(-5.0, 5.0), (0.0, 5.0)]
    viol = [comparison_certificate(_problem(n, box=box)).max_violation for n in (101, 201, 401)]
    assert viol[0] > viol[1] > viol[2] > 0
    rates = [math.log2(a / b) for a, b in zip(viol, viol[1:])]
    assert min(rates) >= 0.9, (viol, rates)
