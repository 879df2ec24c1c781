"""Acceptance suite: one test per criterion; the terminal summary lists PASS/FAIL per criterion.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import math
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from gausslike.cli import data_from_expr, main, random_bump, rearrangement_rows
from gausslike.density import ProductDensity, custom_table, gaussian, power, quadratic_shift, softplus_mixture
from gausslike.isoperimetry import (
    RegionSpec,
    SeparatedDensity,
    VariationSpec,
    isoperimetric_check,
    pushforward_chain_check,
    variation_curve,
    volume_matched_graph,
)
from gausslike.pde import CoefficientField, EllipticProblem, comparison_certificate, solve_elliptic
from gausslike.rearrangement import GridFunction
from gausslike.spectral import SigmaProfile, stability_report
from gausslike.transport import build_map, certify_lemma1, identity_residual, potential_from_map

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


NAMED = {
    "gaussian": gaussian(),
    "power(1)": power(1),
    "power(2)": power(2),
    "power(3)": power(3),
    "quadratic_shift(0.5)": quadratic_shift(0.5),
    "quadratic_shift(1.0)": quadratic_shift(1.0),
}


# -- 1. transport identity ------------------------------------------------------

def test_criterion_01_transport_identity(criterion):
    worst, slowest = 0.0, 0.0
    for name, p in NAMED.items():
        t0 = time.perf_counter()
        r = identity_residual(build_map(p))
        slowest = max(slowest, time.perf_counter() - t0)
        worst = max(worst, r)
    criterion(worst <= 1e-8, f"max identity residual {worst:.2e} <= 1e-8 over 6 families", slowest, 1.0)


# -- 2. derivative bound ----------------------------------------------------------

def test_criterion_02_derivative_bound(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    potentials = list(NAMED.values())
    for _ in range(100):
        k = int(rng.integers(1, 5))
        potentials.append(softplus_mixture(rng.uniform(0.0, 2.0, k), rng.uniform(-2.0, 2.0, k),
                                           rng.uniform(-2.0, 2.0, k), k=float(rng.uniform(0.0, 2.0))))
    lowest = min(certify_lemma1(build_map(p)).min_Aprime for p in potentials)
    criterion(lowest >= 1 - 1e-7, f"min A' = {lowest:.6f} >= 1 - 1e-7 over 106 potentials",
              time.perf_counter() - t0, 10.0)


# -- 3. cubic map anchor ----------------------------------------------------------

def test_criterion_03_cubic_map_potential(criterion):
    worst_d2, worst_B = 0.0, 0.0
    x = np.linspace(-1.2, 1.2, 20)
    for alpha in (0.5, 1.0, 2.0):
        # no A' supplied: the derivative is taken by finite differences
        rep = potential_from_map(lambda t, a=alpha: t + a * t**3, grid=np.linspace(-1.5, 1.5, 301))
        k = int(np.argmin(np.abs(rep.x)))
        worst_d2 = max(worst_d2, abs(rep.B_second[k] + 6 * alpha))
        closed = alpha * x**4 + alpha**2 * x**6 / 2 - np.log(1 + 3 * alpha * x**2) + LOG_SQRT_2PI
        worst_B = max(worst_B, float(np.max(np.abs(rep.B_fn(x) - closed))))
    criterion(worst_d2 <= 1e-3 and worst_B <= 1e-8,
              f"|B''(0) + 6 alpha| = {worst_d2:.1e} <= 1e-3, closed-form B error {worst_B:.1e} <= 1e-8")


# -- 4 and 5. isoperimetric corpus and pushforward chain -----------------------------

def _table_axis():
    x = np.linspace(-9.0, 9.0, 181)
    return custom_table(x, 0.25 * x**2 + 0.1 * np.log1p(np.exp(x)))


def _densities():
    mix = softplus_mixture([0.7, 0.4], [1.0, -1.5], [0.3, -0.2])
    return [
        ("gaussian", (gaussian(),), True),
        ("power(1)", (power(1),), False),
        ("power(2)", (power(2),), False),
        ("power(3)", (power(3),), False),
        ("quadratic_shift(0.5)", (quadratic_shift(0.5),), False),
        ("quadratic_shift(1.0)", (quadratic_shift(1.0),), False),
        ("softplus_mixture", (mix,), False),
        ("custom_table", (_table_axis(),), False),
        ("gaussian^2", (gaussian(), gaussian()), True),
        ("power(2) x quadratic_shift(0.5)", (power(2), quadratic_shift(0.5)), False),
    ]


def _centre(ax):
    lo, hi = ax.truncation(1e-3)
    return 0.5 * (lo + hi), 0.5 * (hi - lo)


def _regions(axes, rng, gaussian_case):
    """20 regions per density: (spec or profile, lam, equality expected, kind)."""
    N = len(axes) + 1
    out = []
    for lam in (-0.6, 0.1, 0.9):
        out.append(("slice", RegionSpec.halfspace_slice(lam), None, True))
    for _ in range(4):
        a, b = np.sort(rng.uniform(-1.5, 2.0, 2))
        if rng.uniform() < 0.5:
            out.append(("slab", RegionSpec.slab_union([(a, b)]), None, False))
        else:
            c = rng.uniform(b + 0.2, b + 1.0)
            out.append(("slab", RegionSpec.slab_union([(a, b), (c, math.inf)]), None, False))
    centres = [_centre(ax) for ax in axes]
    for _ in range(10):
        amp = rng.uniform(0.15, 0.35)
        freq = rng.uniform(0.8, 2.0, N - 1)
        phase = rng.uniform(0, 2 * math.pi, N - 1)
        scale = np.array([c[1] for c in centres])

        def prof(x, amp=amp, freq=freq, phase=phase, scale=scale):
            z = np.sum(freq * x / scale * 3.0 + phase, axis=-1)
            return amp * np.sin(z)

        out.append(("wavy", prof, float(rng.uniform(-0.6, 0.8)), False))
    for _ in range(3):
        slope = rng.uniform(-0.3, 0.3, N - 1)
        slope = np.where(np.abs(slope) < 0.1, 0.15, slope)
        mid = np.array([c[0] for c in centres])
        out.append(("affine", lambda x, s=slope, m=mid: np.sum(s * (x - m), axis=-1),
                    float(rng.uniform(-0.6, 0.8)), gaussian_case))
    return out


@lru_cache(maxsize=1)
def _corpus():
    rng = np.random.default_rng(7)
    rows = []
    for dname, axes, gauss in _densities():
        d = ProductDensity(axes)
        n = 51 if d.N == 2 else 31
        dmap = None
        for kind, region, lam, equal in _regions(axes, rng, gauss):
            if lam is not None:
                region = volume_matched_graph(d, region, lam, n)
            cert = isoperimetric_check(d, region, n, check_shrink=kind in ("wavy", "affine"))
            chain = None
            if kind in ("slice", "wavy", "affine"):
                if dmap is None:
                    dmap = ProductDensity(tuple(build_map(a) for a in axes))
                if kind == "slice":
                    lam_s = region.lam
                    region = RegionSpec.graph(lambda x, v=lam_s: np.full(x.shape[:-1], v))
                chain = pushforward_chain_check(dmap, region, n)
            rows.append((dname, kind, equal, cert, chain))
    return rows


def test_criterion_04_isoperimetric_corpus(criterion):
    t0 = time.perf_counter()
    rows = _corpus()
    elapsed = time.perf_counter() - t0
    bad_gap = [r for r in rows if not r[3].gap >= -r[3].tol_geom]
    # equality exactly where expected, strict inequality elsewhere
    bad_eq = [r for r in rows if (abs(r[3].gap) <= r[3].tol_geom) != r[2]]
    shrink = [r for r in rows if r[3].tol_geom_fine is not None]
    floor = lambda c: 1e-10 * (abs(c.P_M) + abs(c.P_slice))
    # a tolerance already at its rounding floor cannot shrink further
    bad_shrink = [r for r in shrink
                  if not (r[3].tol_geom_fine <= 0.5 * r[3].tol_geom or r[3].tol_geom <= 4 * floor(r[3]))]
    at_floor = sum(1 for r in shrink if not r[3].tol_geom_fine <= 0.5 * r[3].tol_geom) - len(bad_shrink)
    ok = len(rows) == 200 and not bad_gap and not bad_eq and not bad_shrink
    criterion(ok, f"{len(rows)} regions: {len(bad_gap)} gap violations, {len(bad_eq)} misplaced equalities, "
                  f"graph tolerances: {len(shrink) - len(bad_shrink) - at_floor} halve, {at_floor} at rounding floor, "
                  f"{len(bad_shrink)} neither", elapsed, 300.0)


def test_criterion_05_pushforward_chain(criterion):
    rows = [r for r in _corpus() if r[4] is not None]
    bad = [r for r in rows if not r[4].passed]
    worst = min(min(r[4].link1 + r[4].tol1, r[4].link2 + r[4].tol2) for r in rows)
    criterion(not bad and len(rows) >= 100,
              f"{len(rows)} graph regions, {len(bad)} failing links, min(link + tol) = {worst:.2e}")


# -- 6. stability anchors -----------------------------------------------------------

def test_criterion_06_stability_anchors(criterion):
    t0 = time.perf_counter()
    g = stability_report(lambda x: np.exp(-np.sum(x * x, axis=-1)), SigmaProfile.gaussian(1.0), [(-8.0, 8.0)], 401)
    one = lambda x: np.ones(x.shape[:-1])
    iv = stability_report(one, SigmaProfile.gaussian(0.5), [(0.0, 2 * math.pi)], 401)
    ok = (abs(g.kappa1 - 2) <= 0.02 and abs(g.tau - 2) <= 1e-6 and g.satisfied
          and abs(iv.kappa1 - 0.25) <= 0.005 and iv.kappa1 < iv.tau and abs(iv.tau - 1) <= 1e-6
          and not iv.satisfied)
    criterion(ok, f"Gaussian kappa1 = {g.kappa1:.5f}, tau = {g.tau:.8f}; interval kappa1 = {iv.kappa1:.5f} "
                  f"< tau = {iv.tau:.6f}, satisfied = {iv.satisfied}", time.perf_counter() - t0, 30.0)


# -- 7. variation curves ----------------------------------------------------------

def test_criterion_07_variation_curves(criterion):
    t0 = time.perf_counter()
    sd = SeparatedDensity.from_product(ProductDensity((gaussian(),)))
    profiles = {
        "sin": VariationSpec(0.3, lambda x: np.sin(x[..., 0]), grad_u=lambda x: np.cos(x)),
        "cos": VariationSpec(-0.2, lambda x: np.cos(x[..., 0]), grad_u=lambda x: -np.sin(x)),
        "x1": VariationSpec(0.3, lambda x: x[..., 0], grad_u=lambda x: np.ones(x.shape)),
        "bump": VariationSpec(0.5, lambda x: np.exp(-x[..., 0] ** 2), grad_u=lambda x: -2 * x * np.exp(-x**2)),
    }
    res = {k: variation_curve(sd, v) for k, v in profiles.items()}
    d1 = max(abs(r.dP0) for r in res.values())
    ok = d1 <= 1e-5 and res["sin"].d2P0 >= -1e-5 and abs(res["x1"].d2P0) <= 1e-4
    criterion(ok, f"max |P'(0)| = {d1:.1e}, sin P''(0) = {res['sin'].d2P0:.4f}, "
                  f"x1 |P''(0)| = {abs(res['x1'].d2P0):.1e}", time.perf_counter() - t0, 30.0)


# -- 8. rearrangement suite ---------------------------------------------------------

def test_criterion_08_rearrangement_suite(criterion):
    t0 = time.perf_counter()
    d = ProductDensity((gaussian(),))
    box = [(-3.0, 3.0), (-2.0, 3.0)]
    rng = np.random.default_rng(8)
    failed = {}
    for i in range(50):
        f = GridFunction.from_callable(d, box, 61, random_bump(rng, box))
        for row in rearrangement_rows(f, i, rng, levels=50):
            failed.setdefault(row[1], 0)
            failed[row[1]] += 0 if row[-1] else 1
    ok = len(failed) == 7 and not any(failed.values())
    detail = ", ".join(f"{k} {50 - v}/50" for k, v in failed.items())
    criterion(ok, detail, time.perf_counter() - t0, 120.0)


# -- 9. PDE comparison ----------------------------------------------------------------

def _manufactured_rate():
    d = ProductDensity((gaussian(),))
    box = [(0.0, 1.0), (0.0, 1.0)]

    def f(x):
        a, b = np.pi * x[..., 0], np.pi * x[..., 1]
        grad = np.stack([np.pi * np.cos(a) * np.sin(b), np.pi * np.sin(a) * np.cos(b)], axis=-1)
        return 2 * np.pi**2 * np.sin(a) * np.sin(b) + np.sum(x * grad, axis=-1)

    errs = []
    for n in (101, 201):
        p = EllipticProblem(d, box, n, CoefficientField.phi_identity(), f)
        X = p.points
        exact = np.sin(np.pi * X[..., 0]) * np.sin(np.pi * X[..., 1])
        errs.append(float(np.max(np.abs(solve_elliptic(p, tol=1e-13).u.values - exact))))
    return math.log2(errs[0] / errs[1])


def test_criterion_09_pde_comparison(criterion):
    t0 = time.perf_counter()
    d = ProductDensity((gaussian(),))
    box = [(-2.0, 2.0), (-1.0, 2.0)]
    coefs = [(CoefficientField.phi_identity(), 1.0),
             (CoefficientField.phi_diag([1.0, 2.0]), 2.0),
             (CoefficientField.phi_matrix([[1.5, 0.5], [0.5, 1.5]]), 2.0)]
    data = ["one", "bump(0.3, 0.4, 0.8)", "random(3)"]
    point = grad = linf = total = 0
    for co, C in coefs:
        for j, expr in enumerate(data):
            for n in (101, 201):
                p = EllipticProblem(d, box, n, co, data_from_expr(expr, 100 + j), C)
                cert = comparison_certificate(p)
                total += 1
                point += cert.pointwise_pass
                grad += all(cert.gradient_pass.values())
                linf += cert.linf_pass
    rate = _manufactured_rate()
    ok = point == grad == linf == total == 18 and rate >= 1.8
    criterion(ok, f"pointwise {point}/18, gradient q in (0.5, 1, 2) {grad}/18, sup bound {linf}/18, "
                  f"manufactured rate {rate:.3f} >= 1.8", time.perf_counter() - t0, 300.0)


# -- 10. negative controls ------------------------------------------------------------

ISO_CORRUPT = """\
[experiment]
task = isoperimetry
seed = 0

[density]
axes = ["power(2)"]

[isoperimetry]
regions = ["wavy(0.2, 1.0, 0.0)", "slice(0.3)"]
perimeter_scale = 0.9
"""

# the comparison is nearly sharp only when G is close to a half space slice,
# so the corrupted v is tested on a wide box sitting on x_N = 0
PDE_CORRUPT = """\
[experiment]
task = pde
seed = 0

[density]
axes = ["gaussian"]

[pde]
box = [(-5.0, 5.0), (0.0, 5.0)]
levels = [101]
coefficients = ["identity"]
data = ["one"]
v_scale = 0.9
"""


def test_criterion_10_negative_controls(criterion, tmp_path, capsys):
    codes = {}
    for task, text in (("isoperimetry", ISO_CORRUPT), ("pde", PDE_CORRUPT)):
        cfg = tmp_path / f"{task}.ini"
        cfg.write_text(text)
        codes[task] = main([task, "--config", str(cfg), "--out", str(tmp_path / task)])
        # the uncorrupted run must pass, so the failure is due to the corruption
        cfg.write_text(text.replace("perimeter_scale = 0.9", "").replace("v_scale = 0.9", ""))
        codes[task + " clean"] = main([task, "--config", str(cfg), "--out", str(tmp_path / (task + "0"))])
    capsys.readouterr()
    ok = codes == {"isoperimetry": 2, "isoperimetry clean": 0, "pde": 2, "pde clean": 0}
    criterion(ok, f"exit codes: perimeter x0.9 -> {codes['isoperimetry']} (clean {codes['isoperimetry clean']}), "
                   f"v x0.9 -> {codes['pde']} (clean {codes['pde clean']})")


if __name__ == "__main__":
    sys.exit(pytest.main([str(Path(__file__)), "-q"]))
