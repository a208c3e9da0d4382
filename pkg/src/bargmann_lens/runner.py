"""Experiment pipelines behind the CLI subcommands.

Each runner builds its backend/family/chart stack from an
ExperimentConfig, computes the requested diagnostics, applies the
configured acceptance thresholds, and returns a report payload plus data
tables.  All randomness flows from the config seed; per-rung work is
distributed over threads at rung granularity, with results assembled in
ladder order, so outputs are byte-identical for any thread count.
"""

import math
import os
import time

import numpy as np

from .backends import cp1_backend, cp1_section, theta_product_section, theta_section, theta_value, torus_backend
from .config import ConfigError
from .diagnostics import (
    DiagnosticsReport,
    curvature_estimate,
    symplectic_margin,
    transversality_margin,
    zero_locus,
)
from .geometry import BallDomain, ConnectionField, standard_symplectic
from .model import (
    bargmann_section,
    curvature_of,
    dbar_defect,
    model_connection_field,
    radial_flatness_defect,
    reweighted_ordinary_dbar_defect,
)
from .parallel import parallel_map, resolve_threads
from .renormalize import (
    build_chart,
    chart_diagnostics,
    limit_extract,
    pullback_connection,
    pullback_structure,
    radial_gauge,
    renormalize_section,
)
from . import reporting

_NUMERIC_FAILURES = (FloatingPointError, ArithmeticError, np.linalg.LinAlgError)


# ---------------------------------------------------------------------------
# family and chart construction from configs


def build_backend(cfg):
    if cfg.backend_kind == "torus":
        return torus_backend(cfg.n)
    return cp1_backend()


def _theta_index(cfg, k):
    j = k // 2 if cfg.theta_j == "half" else int(cfg.theta_j)
    if not (0 <= j < k):
        raise ConfigError(f"theta index {j} out of range for k={k}")
    return j


def _product_terms(cfg, k):
    q = int(round(math.sqrt(k))) if cfg.product_q == "sqrt" else int(cfg.product_q)
    if not (1 <= q < k):
        raise ConfigError(f"product index q={q} out of range for k={k}")
    g = cfg.product_gamma
    return [(1.0, 0, 0), (g, q, 0), (g, k - q, 0), (g, 0, q), (g, 0, k - q)]


def resolve_cp1_coeffs(cfg, rng):
    if cfg.cp1_coeffs == "random":
        deg = int(cfg.cp1_degree)
        if deg + 1 > min(cfg.ladder):
            raise ConfigError(f"random polynomial degree {deg} exceeds the smallest ladder power")
        return rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
    return np.asarray(cfg.cp1_coeffs, dtype=complex)


def build_family(cfg, backend, k, cp1_coeffs=None):
    if cfg.family_kind == "theta":
        return theta_section(k, _theta_index(cfg, k), backend)
    if cfg.family_kind == "theta-product":
        return theta_product_section(k, _product_terms(cfg, k), backend)
    return cp1_section(k, cp1_coeffs, backend)


def _diagonal_product_root(cfg, k, seed=0.02 + 0.0j):
    """Damped Newton zero of the product family on the diagonal z1 = z2."""
    q = int(round(math.sqrt(k))) if cfg.product_q == "sqrt" else int(cfg.product_q)
    g = cfg.product_gamma

    def s_diag(p):
        t0 = theta_value(np.asarray(p, dtype=complex), k, 0)
        tot = t0 * t0
        for j in (q, k - q):
            tot = tot + 2 * g * theta_value(np.asarray(p, dtype=complex), k, j) * t0
        return complex(tot)

    p = complex(seed)
    for _ in range(120):
        val = s_diag(p)
        if abs(val) < 1e-14:
            break
        h = 1e-7
        dx = (s_diag(p + h) - s_diag(p - h)) / (2 * h)
        dy = (s_diag(p + 1j * h) - s_diag(p - 1j * h)) / (2 * h)
        J = np.array([[dx.real, dy.real], [dx.imag, dy.imag]])
        step = np.linalg.solve(J, -np.array([val.real, val.imag]))
        lam = min(1.0, 0.05 / max(float(np.linalg.norm(step)), 1e-12))
        p = p + lam * (step[0] + 1j * step[1])
    if abs(s_diag(p)) > 1e-10:
        raise ConfigError(f"diagonal zero search did not converge for k={k}")
    return np.array([p.real, p.imag, p.real, p.imag])


def resolve_center(cfg, k, rung_index, cp1_coeffs=None):
    """Chart center for one rung; 'zero' centers the chart on a zero of the
    rung's section (centers may move with k)."""
    if isinstance(cfg.center, str):
        if cfg.center == "origin":
            return np.zeros(2 * cfg.n)
        if cfg.family_kind == "theta":
            j = _theta_index(cfg, k)
            y0 = (0.5 - j / k) % 1.0
            y0 = y0 - 1.0 if y0 > 0.5 else y0
            return np.array([0.0, y0])
        if cfg.family_kind == "theta-product":
            return _diagonal_product_root(cfg, k)
        roots = np.roots(np.asarray(cp1_coeffs, dtype=complex)[::-1])
        roots = roots[np.abs(roots) < 2.0]
        if roots.size == 0:
            raise ConfigError("cp1 polynomial has no zero inside the working chart region")
        w = roots[np.argmin(np.abs(roots))]
        return np.array([w.real, w.imag])
    if isinstance(cfg.center, list):
        return np.asarray(cfg.center[rung_index], dtype=float)
    return np.asarray(cfg.center, dtype=float)


def _structure_grid(cfg):
    pts = cfg.structure_points if cfg.structure_points else cfg.points_per_axis
    return BallDomain(cfg.n, radius=cfg.radius, points_per_axis=pts)


# ---------------------------------------------------------------------------
# threshold bookkeeping


class _Checks:
    def __init__(self, report, thresholds):
        self.report = report
        self.thresholds = thresholds
        self.failed = []

    def record(self, name, value, *, grid, tolerance=None, passed=None, **extra):
        rec = self.report.add(
            name,
            value,
            points_per_axis=grid.points_per_axis,
            h=grid.h,
            tolerance=tolerance,
            passed=passed,
            **extra,
        )
        if passed is False:
            self.failed.append(name)
        return rec

    def check_max(self, name, value, key, default=None, *, grid, **extra):
        bound = self.thresholds.get(key, default)
        passed = None if bound is None else bool(value <= bound)
        self.record(name, value, grid=grid, tolerance=bound, passed=passed, **extra)

    def check_min(self, name, value, key, default=None, *, grid, **extra):
        bound = self.thresholds.get(key, default)
        passed = None if bound is None else bool(value >= bound)
        self.record(name, value, grid=grid, tolerance=bound, passed=passed, **extra)


# ---------------------------------------------------------------------------
# model-check


def _sinusoidal_connection(domain):
    def coeffs(p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape, dtype=complex)
        out[..., 1] = -1j * np.sin(np.pi * p[..., 0])
        return out

    return ConnectionField(domain, coefficients=coeffs, label="sinusoidal-test")


def _random_poly_table(rng, n, max_degree=5):
    table = {}
    for _ in range(int(rng.integers(2, 6))):
        key = tuple(int(e) for e in rng.integers(0, max_degree + 1, size=n))
        if sum(key) <= max_degree:
            table[key] = complex(rng.normal(), rng.normal())
    table.setdefault((0,) * n, 1.0)
    return table


def run_model_check(cfg, threads):
    report = DiagnosticsReport()
    checks = _Checks(report, cfg.thresholds)
    rng = np.random.default_rng(cfg.seed)
    dom = BallDomain(1, radius=1.0, points_per_axis=cfg.points_per_axis)
    dom_fine = BallDomain(1, radius=1.0, points_per_axis=2 * cfg.points_per_axis - 1)

    A = model_connection_field(dom)
    pts = rng.uniform(-0.4, 0.4, size=(8, 2))
    err_an = 0.0
    err_fd = 0.0
    for z in pts:
        F = curvature_of(A, z, mode="analytic")
        err_an = max(err_an, abs(F[0, 1] + 2j * np.pi))
        err_fd = max(err_fd, float(np.max(np.abs(curvature_of(A, z, mode="fd") - F))))
    checks.record("model_curvature_analytic_err", err_an, grid=dom, tolerance=1e-12, passed=err_an <= 1e-12)
    checks.record("model_curvature_fd_err", err_fd, grid=dom, tolerance=1e-12, passed=err_fd <= 1e-12)

    z0 = np.array([0.23, 0.11])
    exact = -1j * np.pi * np.cos(np.pi * z0[0])
    e1 = abs(curvature_of(_sinusoidal_connection(dom), z0, mode="fd")[0, 1] - exact)
    e2 = abs(curvature_of(_sinusoidal_connection(dom_fine), z0, mode="fd")[0, 1] - exact)
    order = float(np.log2(e1 / e2))
    checks.record(
        "curvature_fd_observed_order", order, grid=dom_fine, passed=1.8 <= order <= 2.2, lo=1.8, hi=2.2
    )

    flat = radial_flatness_defect(A)
    checks.record("model_radial_flatness", flat, grid=dom, tolerance=1e-12, passed=flat <= 1e-12)

    worst = 0.0
    for trial in range(cfg.random_polys):
        n = 1 if trial % 2 == 0 else 2
        domp = BallDomain(n, radius=1.0, points_per_axis=33 if n == 1 else 11)
        s = bargmann_section(_random_poly_table(rng, n), domp)
        diff = abs(dbar_defect(s, mode="analytic") - reweighted_ordinary_dbar_defect(s, mode="analytic"))
        worst = max(worst, diff)
    checks.record(
        "holomorphy_equivalence_sup",
        worst,
        grid=dom,
        tolerance=1e-8,
        passed=worst <= 1e-8,
        samples=cfg.random_polys,
    )

    gauss = bargmann_section({(0,): 1.0}, dom)
    gauss_fine = bargmann_section({(0,): 1.0}, dom_fine)
    d_an = dbar_defect(gauss, mode="analytic")
    checks.record("bargmann_dbar_analytic", d_an, grid=dom, tolerance=1e-10, passed=d_an <= 1e-10)
    d1 = dbar_defect(gauss, mode="fd")
    d2 = dbar_defect(gauss_fine, mode="fd")
    order = float(np.log2(d1 / d2))
    checks.record(
        "bargmann_dbar_fd_order", order, grid=dom_fine, passed=1.8 <= order <= 2.2, lo=1.8, hi=2.2
    )

    rows = [
        {
            "name": r["name"],
            "value": r["value"],
            "points_per_axis": r["points_per_axis"],
            "h": r["h"],
            "passed": r.get("passed", True),
        }
        for r in report.records
    ]
    tables = {"model_check": (["name", "value", "points_per_axis", "h", "passed"], rows)}
    return report, tables, not checks.failed


# ---------------------------------------------------------------------------
# shared rung pipeline


def _rung_pipeline(cfg, backend, k, rung_index, cp1_coeffs, grid):
    family = build_family(cfg, backend, k, cp1_coeffs)
    center = resolve_center(cfg, k, rung_index, cp1_coeffs)
    chart = build_chart(backend, center, k)
    gauge = radial_gauge(chart, grid, phase_budget=cfg.phase_budget)
    sigma = renormalize_section(family, chart, gauge, grid)
    return {"k": k, "family": family, "chart": chart, "gauge": gauge, "sigma": sigma, "center": center}


def run_renorm(cfg, threads):
    report = DiagnosticsReport()
    checks = _Checks(report, cfg.thresholds)
    backend = build_backend(cfg)
    rng = np.random.default_rng(cfg.seed)
    cp1_coeffs = resolve_cp1_coeffs(cfg, rng) if cfg.family_kind == "cp1-poly" else None
    k = cfg.ladder[0]
    grid = BallDomain(cfg.n, radius=cfg.radius, points_per_axis=cfg.points_per_axis)
    stage = _rung_pipeline(cfg, backend, k, 0, cp1_coeffs, grid)

    diag = chart_diagnostics(stage["chart"], seed=cfg.seed)
    checks.check_max("chart_metric_at_zero", diag["metric_at_zero"], "max_metric_at_zero", 1e-8, grid=grid, k=k)
    checks.record(
        "chart_j_commutation", diag["j_commutation"], grid=grid, tolerance=1e-10,
        passed=diag["j_commutation"] <= 1e-10, k=k,
    )
    drift_tol = 1e-6 if cfg.backend_kind == "torus" else 1e-4
    checks.record(
        "chart_radial_speed_drift", diag["radial_speed_drift"], grid=grid, tolerance=drift_tol,
        passed=diag["radial_speed_drift"] <= drift_tol, k=k,
    )

    sgrid = _structure_grid(cfg)
    pb = pullback_structure(stage["chart"], sgrid)
    for key, val in sorted(pb.deviations.items()):
        checks.record(f"structure_{key}", val, grid=sgrid, k=k)

    _, conn = pullback_connection(stage["chart"], stage["gauge"], grid)
    contraction_tol = cfg.thresholds.get(
        "max_radial_contraction", 1e-6 if cfg.backend_kind == "torus" else 1e-4
    )
    checks.record(
        "connection_radial_contraction",
        conn["radial_contraction"],
        grid=grid,
        tolerance=contraction_tol,
        passed=conn["radial_contraction"] <= contraction_tol,
        k=k,
    )
    checks.record("connection_model_deviation", conn["model_deviation_c0"], grid=grid, k=k)
    checks.record("gauge_drift", conn["gauge_drift"], grid=grid, k=k)

    rows = [
        {"name": r["name"], "value": r["value"], "k": r.get("k", k), "points_per_axis": r["points_per_axis"], "h": r["h"]}
        for r in report.records
    ]
    tables = {"renorm": (["name", "value", "k", "points_per_axis", "h"], rows)}
    return report, tables, not checks.failed


def run_sweep(cfg, threads):
    report = DiagnosticsReport()
    checks = _Checks(report, cfg.thresholds)
    backend = build_backend(cfg)
    rng = np.random.default_rng(cfg.seed)
    cp1_coeffs = resolve_cp1_coeffs(cfg, rng) if cfg.family_kind == "cp1-poly" else None
    grid = BallDomain(cfg.n, radius=cfg.radius, points_per_axis=cfg.points_per_axis)
    sgrid = _structure_grid(cfg)

    def one_rung(args):
        idx, k = args
        stage = _rung_pipeline(cfg, backend, k, idx, cp1_coeffs, grid)
        sigma = stage["sigma"]
        eps = cfg.epsilon_rel * sigma.sup_norm()
        row = {
            "k": k,
            "points_per_axis": grid.points_per_axis,
            "h": grid.h,
            "sup_norm": sigma.sup_norm(),
            "dbar_defect": dbar_defect(sigma, mode="fd"),
            "transversality_margin": transversality_margin(sigma, eps),
            "epsilon": eps,
            "gauge_drift": stage["gauge"].drift,
            "gauge_steps": stage["gauge"].nsteps,
        }
        pb = pullback_structure(stage["chart"], sgrid)
        row["metric_dev_c0"] = pb.deviations["metric_c0"]
        row["omega_dev_c0"] = pb.deviations["omega_c0"]
        row["j_dev_c0"] = pb.deviations["j_c0"]
        _, conn = pullback_connection(stage["chart"], stage["gauge"], grid)
        row["connection_dev_c0"] = conn["model_deviation_c0"]
        row["radial_contraction"] = conn["radial_contraction"]
        return row, sigma

    results = parallel_map(one_rung, list(enumerate(cfg.ladder)), threads)
    rows = [r for r, _ in results]
    sigmas = [s for _, s in results]

    for row in rows:
        for key in ("dbar_defect", "metric_dev_c0", "connection_dev_c0", "transversality_margin"):
            checks.record(f"rung{row['k']}_{key}", row[key], grid=grid, k=row["k"])

    dist_rows = []
    if len(cfg.ladder) >= 3:
        cand = limit_extract(sigmas, cfg.ladder, cfg.m, cfg.subball_radius)
        for (ka, kb), d in zip(zip(cfg.ladder, cfg.ladder[1:]), cand.distances):
            dist_rows.append(
                {"from_k": ka, "to_k": kb, "cm_distance": d, "m": cfg.m, "subball_radius": cfg.subball_radius}
            )
        want_cauchy = cfg.thresholds.get("require_cauchy")
        checks.record(
            "ladder_cauchy",
            1.0 if cand.cauchy else 0.0,
            grid=grid,
            passed=None if not want_cauchy else cand.cauchy,
            m=cfg.m,
            subball_radius=cfg.subball_radius,
        )
        first_defect = rows[0]["dbar_defect"]
        cand_defect = dbar_defect(cand.section, mode="fd")
        ratio = cand_defect / first_defect if first_defect > 0 else 0.0
        checks.check_max("limit_defect_ratio", ratio, "max_defect_ratio", None, grid=grid)
        checks.record("limit_dbar_defect", cand_defect, grid=grid)

    devs = [row["metric_dev_c0"] for row in rows]
    if cfg.thresholds.get("max_structure_dev") is not None:
        worst = max(devs)
        checks.check_max("structure_dev_worst", worst, "max_structure_dev", grid=sgrid)
    if cfg.thresholds.get("slope_lo") is not None and len(cfg.ladder) >= 3 and min(devs) > 0:
        slope = float(np.polyfit(np.log(cfg.ladder), np.log(devs), 1)[0])
        lo, hi = cfg.thresholds["slope_lo"], cfg.thresholds["slope_hi"]
        checks.record("structure_dev_slope", slope, grid=sgrid, passed=lo <= slope <= hi, lo=lo, hi=hi)

    rung_cols = [
        "k", "points_per_axis", "h", "sup_norm", "dbar_defect", "transversality_margin", "epsilon",
        "metric_dev_c0", "omega_dev_c0", "j_dev_c0", "connection_dev_c0", "radial_contraction",
        "gauge_drift", "gauge_steps",
    ]
    tables = {
        "rungs": (rung_cols, rows),
        "distances": (["from_k", "to_k", "cm_distance", "m", "subball_radius"], dist_rows),
    }
    return report, tables, not checks.failed


def run_zeroset(cfg, threads):
    report = DiagnosticsReport()
    checks = _Checks(report, cfg.thresholds)
    backend = build_backend(cfg)
    rng = np.random.default_rng(cfg.seed)
    cp1_coeffs = resolve_cp1_coeffs(cfg, rng) if cfg.family_kind == "cp1-poly" else None
    grid = BallDomain(cfg.n, radius=cfg.radius, points_per_axis=cfg.points_per_axis)

    def one_rung(args):
        idx, k = args
        stage = _rung_pipeline(cfg, backend, k, idx, cp1_coeffs, grid)
        sigma = stage["sigma"]
        locus = zero_locus(sigma)
        seeds = locus.counts["seeds"]
        conv = 1.0 - locus.counts["dropped"] / seeds if seeds else 0.0
        eps = cfg.epsilon_rel * sigma.sup_norm()
        row = {
            "k": k,
            "points_per_axis": grid.points_per_axis,
            "h": grid.h,
            "seeds": seeds,
            "locus_points": len(locus),
            "degenerate_points": int(locus.counts.get("degenerate", 0)),
            "convergence_rate": conv,
            "epsilon": eps,
            "transversality_margin": transversality_margin(sigma, eps),
            "sup_norm": sigma.sup_norm(),
        }
        if cfg.n >= 2 and len(locus) and not locus.degenerate.all():
            row["symplectic_margin"] = symplectic_margin(locus, standard_symplectic(cfg.n))
            row["curvature_sup"] = curvature_estimate(locus)
            row["trivial_n1"] = False
        else:
            row["symplectic_margin"] = float("inf")
            row["curvature_sup"] = 0.0
            row["trivial_n1"] = cfg.n < 2
        return row

    rows = parallel_map(one_rung, list(enumerate(cfg.ladder)), threads)

    for row in rows:
        k = row["k"]
        checks.check_min(
            f"rung{k}_seed_convergence", row["convergence_rate"], "min_seed_convergence", grid=grid, k=k
        )
        if cfg.n >= 2:
            checks.check_min(
                f"rung{k}_symplectic_margin", row["symplectic_margin"], "min_symplectic_margin", grid=grid, k=k
            )
            checks.record(f"rung{k}_curvature_sup", row["curvature_sup"], grid=grid, k=k)
        else:
            checks.record(
                f"rung{k}_symplectic_margin", row["symplectic_margin"], grid=grid,
                passed=True, trivial_n1=True, k=k,
            )
        margin = row["transversality_margin"]
        if cfg.thresholds.get("require_margin_positive"):
            ok = np.isfinite(margin) and margin > 0
            checks.record(f"rung{k}_transversality_margin", margin, grid=grid, passed=bool(ok), k=k)
        else:
            checks.record(f"rung{k}_transversality_margin", margin, grid=grid, k=k)

    if cfg.n >= 2 and len(rows) >= 2 and cfg.thresholds.get("max_curvature_ratio") is not None:
        us = [row["curvature_sup"] for row in rows]
        ratio = max(us) / min(us) if min(us) > 0 else float("inf")
        checks.check_max("curvature_ratio", ratio, "max_curvature_ratio", grid=grid)

    cols = [
        "k", "points_per_axis", "h", "seeds", "locus_points", "degenerate_points", "convergence_rate",
        "epsilon", "transversality_margin", "symplectic_margin", "curvature_sup", "sup_norm", "trivial_n1",
    ]
    tables = {"zeroset": (cols, rows)}
    return report, tables, not checks.failed


def run_report_merge(cfg, threads):
    report = DiagnosticsReport()
    found = reporting.collect_reports(cfg.out)
    rows = []
    for path, payload in found:
        command = payload.get("command", "?")
        if command == "report":
            continue  # never re-ingest a prior merge
        run_name = payload.get("config", {}).get("name", "?")
        for rec in payload.get("records", []):
            rows.append(
                {
                    "run": run_name,
                    "command": command,
                    "record": rec["name"],
                    "value": rec["value"],
                    "points_per_axis": rec["points_per_axis"],
                    "h": rec["h"],
                    "passed": rec.get("passed", True),
                }
            )
    cols = ["run", "command", "record", "value", "points_per_axis", "h", "passed"]
    tables = {"summary": (cols, rows)}
    return report, tables, True


# ---------------------------------------------------------------------------
# entry point


_RUNNERS = {
    "model-check": run_model_check,
    "renorm": run_renorm,
    "sweep": run_sweep,
    "zeroset": run_zeroset,
    "report": run_report_merge,
}


def run(cfg, write=True):
    """Execute a configured experiment.

    Returns (payload, status): status 0 when every configured threshold
    passes, 1 when a threshold fails, 3 on numeric failure (with a partial
    report still written).  Config validation issues raise ConfigError and
    are mapped to status 2 by the CLI before anything is written.
    """
    cfg.validate()
    threads = resolve_threads(cfg.threads)
    t0 = time.time()
    error = None
    try:
        report, tables, passed = _RUNNERS[cfg.command](cfg, threads)
        status = 0 if passed else 1
    except _NUMERIC_FAILURES as exc:
        report, tables, passed = DiagnosticsReport(), {}, False
        error = f"{type(exc).__name__}: {exc}"
        status = 3

    payload = {
        "command": cfg.command,
        "config": cfg.resolved(),
        "config_sha256": cfg.config_hash(),
        "seed": cfg.seed,
        "records": report.records,
        "passed": passed and error is None,
        "elapsed_seconds": round(time.time() - t0, 3),
    }
    payload["config"].pop("threads", None)
    payload["config"].pop("out", None)
    if error is not None:
        payload["error"] = error
        payload["partial"] = True

    if write:
        out_dir = cfg.out
        os.makedirs(out_dir, exist_ok=True)
        artifacts = []
        # elapsed time varies run to run; keep it out of the hashed report
        disk_payload = dict(payload)
        disk_payload.pop("elapsed_seconds", None)
        artifacts.append(reporting.write_report(disk_payload, os.path.join(out_dir, "report.json")))
        for tname, (cols, rows) in sorted(tables.items()):
            artifacts.append(reporting.write_csv(cols, rows, os.path.join(out_dir, f"{tname}.csv")))
        reporting.write_manifest(out_dir, artifacts, cfg.config_hash(), cfg.seed, threads)
    return payload, status
