"""Config-driven certificate runner.

Usage::

    gausslike <task> --config FILE [--out DIR] [--grid-scale F] [--seed N]

Each task writes CSV tables to ``--out`` and prints ``PASS k/k`` or
``FAIL j/k`` (``j`` certificates passed out of ``k``).  Exit status: 0 when
every certificate passes, 2 when at least one fails, 1 on usage,
configuration or numerical infrastructure errors.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ExperimentConfig, parse_call
from .density import (
    AxisPotential,
    ProductDensity,
    custom_table,
    gaussian,
    power,
    quadratic_shift,
    softplus_mixture,
)
from .errors import ConfigError, GausslikeError, LemmaViolationError
from .isoperimetry import (
    ISO_HEADER,
    RegionSpec,
    isoperimetric_check,
    pushforward_chain_check,
    volume_matched_graph,
)
from .pde import PDE_HEADER, CoefficientField, EllipticProblem, comparison_certificate
from .rearrangement import (
    GridFunction,
    decreasing_rearrangement,
    distribution_function,
    hardy_check,
    lp_norm,
    poincare_bound,
    polya_szego_gap,
    profile_lp_norm,
)
from .spectral import STABILITY_HEADER, SigmaProfile, stability_report
from .transport import GridSpec, build_map, certify_lemma1, identity_residual, write_map_csv

_AXES = {
    "gaussian": gaussian,
    "power": power,
    "quadratic_shift": quadratic_shift,
    "softplus_mixture": softplus_mixture,
    "custom_table": custom_table,
}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _scaled(n, scale, odd=True):
    k = max(3, int(round(n * scale)))
    if odd and k % 2 == 0:
        k += 1
    return k


def axis_from_expr(expr, cfg=None, section=None, key=None) -> AxisPotential:
    call = parse_call(expr, cfg, section, key)
    fn = _AXES.get(call.name)
    if fn is None:
        msg = f"unknown density family {call.name!r}; known: {', '.join(sorted(_AXES))}"
        if cfg is not None:
            raise cfg.error(section, key, msg)
        raise ConfigError(msg)
    try:
        return fn(*call.args, **call.kwargs)
    except TypeError as exc:
        if cfg is not None:
            raise cfg.error(section, key, f"bad arguments for {call.name}: {exc}") from None
        raise ConfigError(str(exc)) from None


def density_from_config(cfg: ExperimentConfig, grid: GridSpec = GridSpec()) -> ProductDensity:
    """[density] axes = [...], form = measure2 | defphi, optional N."""
    axes = cfg.get("density", "axes", ["gaussian"], kind=list)
    pots = [axis_from_expr(a, cfg, "density", "axes") for a in axes]
    N = cfg.get("density", "n", len(pots) + 1, kind=int)
    if N != len(pots) + 1:
        raise cfg.error("density", "n", f"N = {N} but {len(pots)} x' axes were given")
    form = cfg.get("density", "form", "measure2", kind=str)
    if form not in ("measure2", "defphi"):
        raise cfg.error("density", "form", "form must be measure2 or defphi")
    if form == "defphi":
        axes_out = tuple(build_map(p, grid) for p in pots)
    else:
        axes_out = tuple(pots)
    return ProductDensity(axes_out, name="x".join(p.name for p in pots))


# -- tasks --------------------------------------------------------------------------------

def run_transport(cfg: ExperimentConfig, out: Path, grid_scale: float = 1.0):
    n = _scaled(cfg.get("grid", "n_nodes", 401, kind=int), grid_scale)
    y_max = float(cfg.get("grid", "y_max", 8.0, kind=float))
    grid = GridSpec(n, y_max)
    eps = float(cfg.get("tolerance", "eps_lemma", 1e-7, kind=float))
    res_tol = float(cfg.get("tolerance", "identity", 1e-8, kind=float))
    families = cfg.get("transport", "families", None, kind=list)
    if families is None:
        families = cfg.get("density", "axes", ["gaussian"], kind=list)
        section = "density"
    else:
        section = "transport"
    rows, results = [], []
    for i, expr in enumerate(families):
        p = axis_from_expr(expr, cfg, section, "families" if section == "transport" else "axes")
        try:
            m = build_map(p, grid, eps_lemma=eps)
        except LemmaViolationError as exc:
            rows.append([i, p.name, math.nan, math.nan, math.nan, False])
            results.append(False)
            print(f"family {p.name}: {exc}", file=sys.stderr)
            continue
        write_map_csv(m, out / f"map_{i}.csv")
        cert = certify_lemma1(m)
        res = identity_residual(m)
        ok = bool(cert.passed and res <= res_tol)
        rows.append([i, p.name, cert.min_Aprime, cert.argmin, res, ok])
        results.append(ok)
    _write(out / "transport.csv", ["family_id", "family", "min_Aprime", "argmin", "identity_residual", "pass"],
           rows)
    return results


def _region(expr, d, n, rng, cfg):
    call = parse_call(expr, cfg, "isoperimetry", "regions")
    a, kw = call.args, call.kwargs
    N1 = d.N - 1
    try:
        if call.name == "slice":
            return [RegionSpec.halfspace_slice(*a, **kw)]
        if call.name == "slabs":
            return [RegionSpec.slab_union(*a, **kw)]
        if call.name == "boxes":
            return [RegionSpec.box_union(*a, **kw)]
        if call.name == "wavy":
            amp, freq, lam = a

            def prof(x, amp=amp, freq=freq):
                return amp * np.sum(np.sin(freq * x + np.arange(N1)), axis=-1)

            return [volume_matched_graph(d, prof, lam, n, name=expr)]
        if call.name == "affine":
            slope, lam = a
            return [volume_matched_graph(d, lambda x, s=slope: s * np.sum(x, axis=-1), lam, n, name=expr)]
        if call.name == "random_wavy":
            count, amp = a
            out = []
            for j in range(int(count)):
                c = rng.uniform(-1.0, 1.0, (3, N1))
                lam = float(rng.uniform(-1.0, 1.0))

                def prof(x, c=c, amp=amp):
                    return amp * np.sum(c[0] * np.sin((1.0 + c[1]) * x + 3.0 * c[2]), axis=-1)

                out.append(volume_matched_graph(d, prof, lam, n, name=f"random_wavy[{j}]"))
            return out
    except (TypeError, ValueError) as exc:
        if isinstance(exc, GausslikeError):
            raise
        raise cfg.error("isoperimetry", "regions", f"bad region {expr!r}: {exc}") from None
    raise cfg.error("isoperimetry", "regions", f"unknown region kind {call.name!r}")


def run_isoperimetry(cfg: ExperimentConfig, out: Path, grid_scale: float = 1.0):
    d = density_from_config(cfg)
    n = _scaled(cfg.get("isoperimetry", "n", 51, kind=int), grid_scale)
    scale = float(cfg.get("isoperimetry", "perimeter_scale", 1.0, kind=float))
    chain = cfg.get("isoperimetry", "chain", d.form == "defphi", kind=bool)
    exprs = cfg.get("isoperimetry", "regions", ["slice(0.0)"], kind=list)
    rng = np.random.default_rng(cfg.seed)
    regions = []
    for e in exprs:
        regions += _region(e, d, n, rng, cfg)
    rows, chain_rows, results = [], [], []
    for j, M in enumerate(regions):
        cert = isoperimetric_check(d, M, n, perimeter_scale=scale)
        rows.append(cert.row(d.name, M.name or f"region{j}"))
        results.append(cert.passed)
        if chain and M.kind == "graph":
            cc = pushforward_chain_check(d, M, n)
            chain_rows.append([d.name, M.name, cc.P_mu, cc.P_gauss_scaled, cc.slice_gauss, cc.link1, cc.link2,
                               cc.tol1, cc.tol2, cc.passed])
            results.append(cc.passed)
    _write(out / "isoperimetry.csv", ISO_HEADER, rows)
    if chain_rows:
        _write(out / "chain.csv", ["density_id", "region_id", "P_mu", "P_gauss_scaled", "slice_gauss", "link1",
                                   "link2", "tol1", "tol2", "pass"], chain_rows)
    return results


def _rho(expr, cfg):
    call = parse_call(expr, cfg, "stability", "rho")
    if call.name == "uniform":
        return lambda x: np.ones(x.shape[:-1])
    if call.name == "gaussian":
        c = float(call.args[0]) if call.args else float(call.kwargs.get("c", 0.5))
        return lambda x, c=c: np.exp(-c * np.sum(x * x, axis=-1))
    raise cfg.error("stability", "rho", f"unknown rho {call.name!r}; known: gaussian, uniform")


def _sigma(expr, cfg):
    call = parse_call(expr, cfg, "stability", "sigma")
    if call.name == "gaussian":
        c = float(call.args[0]) if call.args else float(call.kwargs.get("c", 0.5))
        return SigmaProfile.gaussian(c)
    raise cfg.error("stability", "sigma", f"unknown sigma {call.name!r}; known: gaussian")


def run_stability(cfg: ExperimentConfig, out: Path, grid_scale: float = 1.0):
    rho_expr = cfg.get("stability", "rho", "gaussian(1.0)", kind=str)
    sigma_expr = cfg.get("stability", "sigma", "gaussian(1.0)", kind=str)
    box = cfg.get("stability", "box", [(-8.0, 8.0)], kind=list)
    n = _scaled(cfg.get("stability", "n", 401, kind=int), grid_scale)
    unbounded = cfg.get("stability", "unbounded", False, kind=bool)
    try:
        box = [tuple(float(v) for v in b) for b in box]
    except (TypeError, ValueError):
        raise cfg.error("stability", "box", "box must be a list of (left, right) pairs") from None
    rep = stability_report(_rho(rho_expr, cfg), _sigma(sigma_expr, cfg), box, n, unbounded=unbounded)
    h = (box[0][1] - box[0][0]) / (2 * n - 2)
    domain = "x".join(f"({l:g},{r:g})" for l, r in box)
    _write(out / "stability.csv", STABILITY_HEADER, [rep.row(rho_expr, sigma_expr, domain, h)])
    return [rep.satisfied]


def random_bump(rng, box):
    """Smooth non-negative function vanishing on the boundary of ``box``."""
    N = len(box)
    c = np.array([rng.uniform(l + 0.25 * (r - l), r - 0.25 * (r - l)) for l, r in box])
    w = rng.uniform(0.5, 1.5)
    amp = rng.uniform(0.5, 2.0)
    k = int(rng.integers(1, 3))

    def f(x):
        env = np.ones(x.shape[:-1])
        for i, (l, r) in enumerate(box):
            env = env * np.sin(np.pi * (x[..., i] - l) / (r - l)) ** k
        return amp * env * np.exp(-np.sum((x - c) ** 2, axis=-1) / w**2)

    return f


def rearrangement_rows(f: GridFunction, fid, rng, levels=50):
    """Run the inequality suite on one function; returns CSV rows (last column: pass)."""
    rows = []
    prof = decreasing_rearrangement(f)
    cell = float(f.max_cell_mass)
    umax = float(np.max(np.abs(f.values)))
    ts = np.linspace(0.0, umax, levels + 2)[1:-1]
    err = max(abs(distribution_function(f, t) - prof.superlevel_mass(t)) for t in ts)
    rows.append([fid, "equimeasurability", err, cell, cell, bool(err <= cell)])
    for p in (1.0, 2.0, math.inf):
        lhs, rhs = lp_norm(f, p), profile_lp_norm(prof, p)
        if math.isinf(p):
            tol = 0.0
            diff = abs(lhs - rhs)
        else:
            lhs, rhs = lhs**p, rhs**p
            tol = 2.0 * cell * umax**p
            diff = abs(lhs - rhs)
        rows.append([fid, f"cavalieri_p{p:g}", lhs, rhs, tol, bool(diff <= tol)])
    ps = polya_szego_gap(f)
    rows.append([fid, "polya_szego", ps.lhs, ps.rhs, ps.tol, ps.passed])
    pc = poincare_bound(f)
    rows.append([fid, "poincare", pc.ratio, pc.K_bound, pc.tol, pc.passed])
    (l, r) = f.box[-1]
    a, b = np.sort(rng.uniform(l, r, 2))
    E = RegionSpec.slab_union([(a, b)])
    hc = hardy_check(f, E)
    rows.append([fid, "hardy", hc.lhs, hc.rhs, 0.0, hc.passed])
    return rows


REARRANGE_HEADER = ["function_id", "check", "lhs", "rhs", "tol", "pass"]


def run_rearrange(cfg: ExperimentConfig, out: Path, grid_scale: float = 1.0):
    d = density_from_config(cfg)
    default_box = [(-3.0, 3.0)] * (d.N - 1) + [(-2.0, 3.0)]
    box = cfg.get("rearrange", "box", default_box, kind=list)
    if len(box) != d.N:
        raise cfg.error("rearrange", "box", f"box needs {d.N} intervals")
    for (l, r), ax in zip(box, d.axes):
        if not ax.a <= l < r <= ax.b:
            raise cfg.error("rearrange", "box", "box must lie inside S")
    n = _scaled(cfg.get("rearrange", "n", 61, kind=int), grid_scale)
    count = cfg.get("rearrange", "count", 10, kind=int)
    rng = np.random.default_rng(cfg.seed)
    rows, results = [], []
    for j in range(count):
        fn = random_bump(rng, box)
        f = GridFunction.from_callable(d, box, n, fn)
        rr = rearrangement_rows(f, j, rng)
        rows += rr
        results += [r[-1] for r in rr]
    _write(out / "rearrange.csv", REARRANGE_HEADER, rows)
    return results


def coefficient_from_expr(expr, cfg=None):
    call = parse_call(expr, cfg, "pde", "coefficients")
    if call.name == "identity":
        return CoefficientField.phi_identity()
    if call.name == "diag":
        return CoefficientField.phi_diag(call.args)
    if call.name == "matrix":
        return CoefficientField.phi_matrix(call.args[0])
    msg = f"unknown coefficient {call.name!r}; known: identity, diag, matrix"
    raise cfg.error("pde", "coefficients", msg) if cfg is not None else ConfigError(msg)


def data_from_expr(expr, seed, cfg=None):
    call = parse_call(expr, cfg, "pde", "data")
    if call.name == "one":
        return lambda x: np.ones(x.shape[:-1])
    if call.name == "bump":
        cx, cy, w = call.args

        def f(x, c=np.array([cx, cy]), w=w):
            r2 = (x[..., 0] - c[0]) ** 2 + (x[..., -1] - c[1]) ** 2
            return np.exp(-r2 / w**2)

        return f
    if call.name == "random":
        k = int(call.args[0]) if call.args else 3
        rng = np.random.default_rng(seed)
        a = rng.uniform(0.0, 1.0, (k, 4))

        def f(x, a=a):
            v = np.ones(x.shape[:-1])
            for row in a:
                v = v + 0.5 / len(a) * np.sin(3 * row[0] * x[..., 0] + 6 * row[1]) * np.cos(
                    2 * row[2] * x[..., -1] + 6 * row[3])
            return v

        return f
    msg = f"unknown datum {call.name!r}; known: one, bump, random"
    raise cfg.error("pde", "data", msg) if cfg is not None else ConfigError(msg)


def run_pde(cfg: ExperimentConfig, out: Path, grid_scale: float = 1.0):
    d = density_from_config(cfg)
    box = cfg.get("pde", "box", [(-2.0, 2.0)] * (d.N - 1) + [(-1.0, 2.0)], kind=list)
    levels = cfg.get("pde", "levels", [101, 201], kind=list)
    coefs = cfg.get("pde", "coefficients", ["identity"], kind=list)
    data = cfg.get("pde", "data", ["one"], kind=list)
    C = float(cfg.get("pde", "c", 1.0, kind=float))
    q_list = tuple(float(q) for q in cfg.get("pde", "q_list", [0.5, 1.0, 2.0], kind=list))
    v_scale = float(cfg.get("pde", "v_scale", 1.0, kind=float))
    rows, results = [], []
    for ci, ce in enumerate(coefs):
        co = coefficient_from_expr(ce, cfg)
        for fi, fe in enumerate(data):
            f = data_from_expr(fe, cfg.seed + fi, cfg)
            for n in levels:
                n = _scaled(int(n), grid_scale)
                p = EllipticProblem(d, box, n, co, f, C)
                cert = comparison_certificate(p, q_list=q_list, v_scale=v_scale)
                h = (p.box[-1][1] - p.box[-1][0]) / (n - 1)
                pid = f"{ce}|{fe}"
                rows += cert.rows(pid, h)
                results += [cert.pointwise_pass, cert.linf_pass] + [cert.gradient_pass[q] for q in q_list]
    _write(out / "pde.csv", PDE_HEADER, rows)
    return results


RUNNERS = {
    "transport": run_transport,
    "isoperimetry": run_isoperimetry,
    "stability": run_stability,
    "rearrange": run_rearrange,
    "pde": run_pde,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="gausslike", description="Certificate runner for Gauss-like measures.")
    sub = ap.add_subparsers(dest="task", required=True)
    for name in RUNNERS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="experiment file")
        sp.add_argument("--out", default=".", help="output directory for CSV tables")
        sp.add_argument("--grid-scale", type=float, default=1.0, help="multiply grid resolutions")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        cfg = cfgmod.load(args.config)
        if cfg.task != args.task:
            raise cfg.error("experiment", "task", f"config is for task {cfg.task!r}, not {args.task!r}")
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be non-negative")
            cfg.seed = args.seed
        if not args.grid_scale > 0:
            raise ConfigError("--grid-scale must be positive")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        results = RUNNERS[args.task](cfg, out, args.grid_scale)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except GausslikeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    k = len(results)
    j = sum(bool(r) for r in results)
    if j == k:
        print(f"PASS {k}/{k}")
        return 0
    print(f"FAIL {j}/{k}")
    return 2


__all__ = ["RUNNERS", "axis_from_expr", "build_parser", "density_from_config", "main"]
