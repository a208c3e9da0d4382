"""Rescaling pipeline: charts for g_k, radially flat gauges, pullbacks, limits.

A chart is the exponential map of the rescaled metric g_k = k*g at a center
p, composed with a g-unitary complex-linear frame, so that the unit ball
maps to a 1/sqrt(k) neighborhood of p.  Sections of L^k pull back through
the chart and a radially flat unitary gauge (parallel transport along the
chart's radial geodesics) to sections over the ball, where they can be
compared across k and against the Gaussian model bundle.
"""

import math
from dataclasses import dataclass

import numpy as np

from .backends import transport_along_rays
from .diagnostics import cm_norm
from .geometry import (
    BallDomain,
    ConnectionField,
    GridSection,
    central_valid_mask,
    fd_axis,
    standard_complex_structure,
    standard_symplectic,
)
from .model import _model_coefficients


@dataclass(frozen=True)
class Chart:
    """Rescaled geodesic coordinates: z -> exp_p(frame(z)/sqrt(k))."""

    backend: object
    center: np.ndarray
    k: int
    frame: np.ndarray

    def velocities(self, z_pts):
        z_pts = np.asarray(z_pts, dtype=np.float64)
        return z_pts @ (self.frame.T / math.sqrt(self.k))

    def points(self, z_pts):
        pos, _ = self.backend.geodesic_with_velocity(self.center, self.velocities(z_pts), 1.0)
        return pos

    def path(self, z_pts, t):
        """Point and velocity of the radial curve t -> chart(t*z)."""
        return self.backend.geodesic_with_velocity(self.center, self.velocities(z_pts), t)

    def differential(self, z_pts, step=1e-3):
        """D(chart) at z as (..., 2n, 2n); exact when the backend's
        exponential differential is available, else fourth-order differences.
        """
        z_pts = np.asarray(z_pts, dtype=np.float64)
        d = 2 * self.backend.n
        base = self.frame / math.sqrt(self.k)
        exp_diff = getattr(self.backend, "exp_differential", None)
        if exp_diff is not None:
            E = exp_diff(self.center, self.velocities(z_pts))
            return E @ base
        cols = []
        for jax in range(d):
            e = np.zeros(d)
            e[jax] = step
            f1 = self.points(z_pts + e) - self.points(z_pts - e)
            f2 = self.points(z_pts + 2 * e) - self.points(z_pts - 2 * e)
            cols.append((8.0 * f1 - f2) / (12.0 * step))
        return np.stack(cols, axis=-1)


def build_chart(backend, p, k, frame=None, tol=1e-10):
    """Chart at center p for power k; validates the frame's unitarity and
    complex linearity against the backend structure at p.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    p = np.asarray(p, dtype=np.float64).reshape(2 * backend.n)
    if frame is None:
        frame = backend.canonical_frame(p)
    frame = np.asarray(frame, dtype=np.float64)
    g = backend.metric(p)
    J = backend.complex_structure(p)
    Jstd = standard_complex_structure(backend.n)
    unit_err = float(np.max(np.abs(frame.T @ g @ frame - np.eye(2 * backend.n))))
    lin_err = float(np.max(np.abs(J @ frame - frame @ Jstd)))
    if unit_err > tol:
        raise ValueError(f"frame is not g(p)-unitary (defect {unit_err:.2e})")
    if lin_err > tol:
        raise ValueError(f"frame is not complex-linear (defect {lin_err:.2e})")
    return Chart(backend, p, int(k), frame)


def chart_diagnostics(chart, num_rays=16, seed=0, num_times=9):
    """Numerical checks of the chart conditions.

    Returns the pulled-back g_k defect from the identity at 0, the
    J-commutation defect of the differential at 0, and the worst relative
    drift of the g_k-speed along random unit rays.
    """
    d = 2 * chart.backend.n
    zero = np.zeros((1, d))
    D0 = chart.differential(zero)[0]
    g0 = chart.backend.metric(chart.points(zero))[0]
    gk0 = chart.k * D0.T @ g0 @ D0
    metric_defect = float(np.max(np.abs(gk0 - np.eye(d))))
    J0 = chart.backend.complex_structure(chart.points(zero))[0]
    Jstd = standard_complex_structure(chart.backend.n)
    j_defect = float(np.max(np.abs(np.linalg.solve(D0, J0 @ D0) - Jstd)))

    rng = np.random.default_rng(seed)
    rays = rng.normal(size=(num_rays, d))
    rays /= np.linalg.norm(rays, axis=1, keepdims=True)
    ts = np.linspace(0.05, 1.0, num_times)
    drifts = []
    for t in ts:
        pos, vel = chart.path(rays, t)
        g = chart.backend.metric(pos)
        speed = np.sqrt(chart.k * np.einsum("...i,...ij,...j->...", vel, g, vel))
        drifts.append(speed)
    speeds = np.stack(drifts)
    speed_drift = float(np.max(np.abs(speeds - 1.0)))
    return {"metric_at_zero": metric_defect, "j_commutation": j_defect, "radial_speed_drift": speed_drift}


# ---------------------------------------------------------------------------
# radially flat gauge


@dataclass(frozen=True)
class RadialGauge:
    """Per-node transport of the L^k fiber along radial chart geodesics.

    ``values`` are unit-modulus (renormalized once; the raw drift is
    recorded), ``log_phase`` is the continuous phase accumulated along the
    ray, so i*d(log_phase) is the gauge contribution to the pulled-back
    connection without branch-cut artifacts.
    """

    chart: Chart
    domain: BallDomain
    values: np.ndarray
    log_phase: np.ndarray
    drift: float
    nsteps: int

    def evaluate(self, z_pts):
        """Fresh transport to arbitrary ball points (off-grid use)."""
        vals, phases, _ = transport_along_rays(
            self.chart.backend, self.chart.k, self.chart.center, self.chart.velocities(z_pts), self.nsteps
        )
        return vals, phases


def _transport_steps(chart, vels, max_len, h, phase_budget):
    """Step count for ray transport: arclength step <= h, plus enough steps
    that the integrator's fifth-order local phase error (~ |a|^5 dt^4 / 120
    for pairing rate a) stays under the budget."""
    a_max = 0.0
    for t in (0.0, 0.5, 1.0):
        pos, vel = chart.backend.geodesic_with_velocity(chart.center, vels, t)
        a_max = max(a_max, float(np.abs(chart.backend.connection_pairing(chart.k, pos, vel)).max()))
    nsteps = max(1, math.ceil(max_len / h))
    if a_max > 0:
        dt = (120.0 * phase_budget / (1.5 * a_max) ** 5) ** 0.25
        nsteps = max(nsteps, math.ceil(1.0 / dt))
    return min(nsteps, 4000)


def radial_gauge(chart, grid, phase_budget=1e-7):
    """Transport gauge on a grid; value 1 at the center, modulus 1 everywhere."""
    if grid.n != chart.backend.n:
        raise ValueError("grid dimension does not match the backend")
    if grid.radius > 1.0 + 1e-12:
        raise ValueError("gauge grids live on the unit ball or smaller")
    max_len = grid.radius * math.sqrt(2 * grid.n)  # worst g_k ray length over cube nodes
    vels = chart.velocities(grid.points)
    nsteps = _transport_steps(chart, vels, max_len, grid.h, phase_budget)
    vals, phases, drift = transport_along_rays(chart.backend, chart.k, chart.center, vels, nsteps)
    return RadialGauge(chart, grid, vals, phases, drift, nsteps)


# ---------------------------------------------------------------------------
# pullbacks


def renormalize_section(family, chart, gauge, grid):
    """Gauge-corrected pullback of a section family through a chart.

    The value at a node is the family's gauge representative at chart(z)
    divided by the radial transport scalar.  Carries an off-grid evaluator
    (same pipeline per point batch) for refinement work; derivative data is
    finite-difference only, so the result is a sampled section.
    """
    if family.k != chart.k:
        raise ValueError(f"family power {family.k} != chart power {chart.k}")
    if family.backend is not chart.backend:
        raise ValueError("family and chart use different backends")
    if gauge.chart is not chart or gauge.domain != grid:
        raise ValueError("gauge was built for a different chart or grid")
    values = family(chart.points(grid.points)) / gauge.values

    def evaluator(z_pts):
        z_pts = np.asarray(z_pts, dtype=np.float64)
        gv, _ = gauge.evaluate(z_pts)
        return family(chart.points(z_pts)) / gv

    return GridSection(grid, values, evaluator=evaluator, label=f"renorm[{family.label}@k={chart.k}]")


@dataclass(frozen=True)
class StructurePullback:
    """Rescaled structure (g_k, omega_k, J) in chart coordinates plus its
    deviation from the flat standard structure."""

    domain: BallDomain
    metric: np.ndarray
    omega: np.ndarray
    complex_structure: np.ndarray
    deviations: dict


def _field_deviation(dom, diff):
    """C0/C1 sup norms of a (..., 2n, 2n) deviation field over ball nodes."""
    flat = np.abs(diff).max(axis=(-2, -1))
    c0 = float(flat[dom.ball_mask].max())
    valid = dom.ball_mask & central_valid_mask(dom.grid_shape, (1,) * (2 * dom.n))
    c1 = 0.0
    for axis in range(2 * dom.n):
        der = fd_axis(diff, axis, 1, dom.h)
        c1 = max(c1, float(np.abs(der).max(axis=(-2, -1))[valid].max()))
    return c0, c1


def pullback_structure(chart, grid):
    """Sampled g_k, omega_k, J in chart coordinates with deviation report."""
    n = grid.n
    pts = grid.points
    D = chart.differential(pts)
    M = chart.points(pts)
    G = chart.backend.metric(M)
    Om = chart.backend.omega(M)
    J = chart.backend.complex_structure(M)
    g_pb = chart.k * np.einsum("...ai,...ab,...bj->...ij", D, G, D)
    om_pb = chart.k * np.einsum("...ai,...ab,...bj->...ij", D, Om, D)
    J_pb = np.linalg.solve(D, J @ D)

    dev = {}
    dev["metric_c0"], dev["metric_c1"] = _field_deviation(grid, g_pb - np.eye(2 * n))
    dev["omega_c0"], dev["omega_c1"] = _field_deviation(grid, om_pb - standard_symplectic(n))
    dev["j_c0"], dev["j_c1"] = _field_deviation(grid, J_pb - standard_complex_structure(n))

    zero = np.zeros((1, 2 * n))
    D0 = chart.differential(zero)[0]
    g0 = chart.k * D0.T @ chart.backend.metric(chart.points(zero))[0] @ D0
    dev["metric_at_zero"] = float(np.max(np.abs(g0 - np.eye(2 * n))))
    return StructurePullback(grid, g_pb, om_pb, J_pb, dev)


def pullback_connection(chart, gauge, grid):
    """Gauged pullback of the L^k connection as a sampled ConnectionField.

    Reports the sup deviation of the coefficients from the model connection
    and the sup of the radial contraction (which radial flatness kills).
    """
    if gauge.chart is not chart or gauge.domain != grid:
        raise ValueError("gauge was built for a different chart or grid")
    n = grid.n
    pts = grid.points
    D = chart.differential(pts)
    M = chart.points(pts)
    A_man = chart.backend.connection_coefficients(chart.k, M)
    A_pb = np.einsum("...i,...ij->...j", A_man, D)
    gauged = A_pb.copy()
    for axis in range(2 * n):
        gauged[..., axis] += 1j * fd_axis(gauge.log_phase, axis, 1, grid.h, one_sided_edges=True)

    valid = grid.ball_mask & central_valid_mask(grid.grid_shape, (1,) * (2 * n))
    model = _model_coefficients(pts)
    deviation = float(np.abs(gauged - model).max(axis=-1)[valid].max())
    radial = float(np.abs(np.sum(gauged * pts, axis=-1))[valid].max())
    report = {"model_deviation_c0": deviation, "radial_contraction": radial, "gauge_drift": gauge.drift}
    field = ConnectionField(grid, sampled_coefficients=gauged, label=f"pullback[k={chart.k}]")
    return field, report


# ---------------------------------------------------------------------------
# limit extraction over k-ladders


@dataclass(frozen=True)
class LimitCandidate:
    """Final rung of a ladder together with its Cauchy diagnostics."""

    section: GridSection
    ladder: tuple
    distances: tuple
    seminorm_order: int
    subball_radius: float
    cauchy: bool
    flags: tuple = ()


def limit_extract(sections, ladder, m, r):
    """Candidate limit from rescaled sections over a k-ladder.

    Records consecutive C^m distances on the radius-r subball; a ladder
    whose distances fail to decrease is flagged 'non-cauchy', never
    truncated or rejected.
    """
    sections = list(sections)
    ladder = tuple(int(k) for k in ladder)
    if len(sections) < 3:
        raise ValueError("ladder needs at least 3 rungs")
    if len(sections) != len(ladder):
        raise ValueError("one section per ladder rung required")
    if m > 3:
        raise ValueError("seminorm order at most 3")
    dom = sections[0].domain
    for s in sections[1:]:
        if s.domain != dom:
            raise ValueError("ladder rungs live on different grids")
    if r >= dom.radius:
        raise ValueError("subball radius must be smaller than the grid radius")
    distances = tuple(
        cm_norm(sections[i + 1] - sections[i], m, r) for i in range(len(sections) - 1)
    )
    if not all(np.isfinite(distances)):
        raise FloatingPointError("non-finite ladder distance")
    cauchy = all(
        d2 < d1 or d1 == d2 == 0.0 for d1, d2 in zip(distances, distances[1:])
    )
    flags = () if cauchy else ("non-cauchy",)
    return LimitCandidate(sections[-1], ladder, distances, int(m), float(r), cauchy, flags)
