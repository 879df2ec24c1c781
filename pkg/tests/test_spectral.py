import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import linalg

from gausslike.errors import DomainError
from gausslike.spectral import (
    SigmaProfile,
    WeightedNeumannProblem,
    assemble,
    kappa1,
    stability_report,
    tau_sup,
)

ONE = lambda x: np.ones(x.shape[:-1])
GAUSS1 = lambda x: np.exp(-np.sum(x * x, axis=-1))


def test_tau_gaussian_c1():
    assert abs(tau_sup(SigmaProfile.gaussian(1.0)).tau - 2.0) <= 1e-8


def test_tau_half_gaussian_via_log_sigma():
    s = SigmaProfile(log_sigma=lambda t: -0.5 * np.asarray(t) ** 2)
    r = tau_sup(s)
    assert abs(r.tau - 1.0) <= 1e-8 and not r.unbounded_trend


def test_tau_constant_profile():
    assert abs(tau_sup(SigmaProfile(sigma=lambda t: np.ones_like(np.asarray(t, dtype=float)))).tau) <= 1e-8


def test_tau_flags_growth_at_window_edge():
    # -(log s)'' = 2 + 2 t^2 grows without bound
    s = SigmaProfile(log_sigma=lambda t: -np.asarray(t) ** 2 - np.asarray(t) ** 4 / 6, window=(-3, 3))
    assert tau_sup(s).unbounded_trend


def test_sigma_must_be_positive():
    with pytest.raises(DomainError):
        tau_sup(SigmaProfile(sigma=lambda t: np.asarray(t, dtype=float), window=(-1, 1)))


def test_dense_oracle_on_coarse_grid():
    p = WeightedNeumannProblem([(0.0, math.pi)], 41, ONE)
    K, m = assemble(p)
    ev = linalg.eigh(K.toarray(), np.diag(m), eigvals_only=True)
    assert abs(ev[0]) <= 1e-10
    assert abs(kappa1(p).kappa - ev[1]) <= 1e-9 * ev[1]


def test_neumann_interval_value():
    # 401 nodes: spacing pi / 400
    assert abs(kappa1(WeightedNeumannProblem([(0.0, math.pi)], 401, ONE)).kappa - 1.0) <= 1e-3


def test_gaussian_weight_value():
    assert abs(kappa1(WeightedNeumannProblem([(-8.0, 8.0)], 801, GAUSS1)).kappa - 2.0) <= 1e-2


def test_rectangle_value_with_dense_oracle():
    p = WeightedNeumannProblem([(0.0, math.pi), (0.0, 2 * math.pi)], (61, 121), ONE)
    k = kappa1(p).kappa
    assert abs(k - 0.25) <= 1e-2
    pc = WeightedNeumannProblem([(0.0, math.pi), (0.0, 2 * math.pi)], (9, 17), ONE)
    K, m = assemble(pc)
    ev = linalg.eigh(K.toarray(), np.diag(m), eigvals_only=True)
    assert abs(kappa1(pc).kappa - ev[1]) <= 1e-9 * ev[1]


def test_rayleigh_quotient_consistency():
    p = WeightedNeumannProblem([(-4.0, 4.0)], 201, GAUSS1)
    K, m = assemble(p)
    r = kappa1(p)
    v = r.vector
    assert abs(v @ (K @ v) / (v @ (m * v)) - r.kappa) <= 1e-10 * r.kappa
    rng = np.random.default_rng(4)
    for _ in range(50):
        x = rng.normal(size=v.size)
        x -= (m @ x) / m.sum()
        assert x @ (K @ x) / (x @ (m * x)) >= r.kappa * (1 - 1e-12)


def test_second_order_grid_convergence():
    k = [kappa1(WeightedNeumannProblem([(-4.0, 4.0)], n, GAUSS1)).kappa for n in (101, 201, 401)]
    assert abs(k[0] - k[1]) <= 4 * abs(k[1] - k[2]) * 1.1
    assert abs(k[0] - k[1]) >= 3 * abs(k[1] - k[2])


def test_domain_monotonicity_on_nested_intervals():
    vals = [kappa1(WeightedNeumannProblem([(0.0, L)], 201, ONE)).kappa for L in (1.0, 2.0, 3.0)]
    assert vals[0] > vals[1] > vals[2]
    vals = [kappa1(WeightedNeumannProblem([(-L, L)], 201, lambda x: np.exp(-0.5 * x[..., 0] ** 2))).kappa
            for L in (0.5, 1.0, 2.0)]
    assert vals[0] > vals[1] > vals[2]


def test_gaussian_stability_report():
    rep = stability_report(GAUSS1, SigmaProfile.gaussian(1.0), [(-8.0, 8.0)], 401)
    assert rep.satisfied
    assert abs(rep.kappa1 - 2.0) <= 2e-2 and abs(rep.tau - 2.0) <= 1e-8
    assert abs(rep.margin) <= 2e-2


def test_short_interval_is_stable():
    half = SigmaProfile(log_sigma=lambda t: -0.5 * np.asarray(t) ** 2)
    rep = stability_report(ONE, half, [(0.0, math.pi / 2)], 201)
    assert rep.satisfied and abs(rep.kappa1 - 4.0) <= 1e-2


def test_long_interval_is_not_stable():
    half = SigmaProfile(log_sigma=lambda t: -0.5 * np.asarray(t) ** 2)
    rep = stability_report(ONE, half, [(0.0, 2 * math.pi)], 201)
    assert not rep.satisfied
    assert abs(rep.kappa1 - 0.25) <= 5e-3 and abs(rep.tau - 1.0) <= 1e-8


def test_unresolved_weight_is_rejected():
    with pytest.raises(DomainError):
        stability_report(lambda x: np.exp(-50 * x[..., 0] ** 2), SigmaProfile.gaussian(1.0), [(-8.0, 8.0)], 11)


@given(st.floats(0.1, 3.0))
def test_tau_scales_with_gaussian_width(c):
    assert abs(tau_sup(SigmaProfile.gaussian(c)).tau - 2 * c) <= 1e-7 * max(1.0, c)


@given(st.floats(0.5, 4.0))
def test_neumann_interval_scaling(L):
    k = kappa1(WeightedNeumannProblem([(0.0, L)], 201, ONE)).kappa
    assert abs(k - (math.pi / L) ** 2) <= 2e-4 * (math.pi / L) ** 2
