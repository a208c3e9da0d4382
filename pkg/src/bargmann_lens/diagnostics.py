"""Quantitative verdicts on sections: seminorms, transversality margins,
zero-locus extraction, symplecticity margins, and curvature suprema.

All operations are pure over immutable inputs.  Sup-type quantities range
over ball nodes where the requested stencils are valid; thresholds that
depend on the section's size are taken relative to its sup over the ball,
so verdicts are invariant under rescaling the section.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    GridSection,
    central_valid_mask,
    fd_axis,
    fd_mixed,
    multi_indices,
)
from .model import _model_coefficients

# ---------------------------------------------------------------------------
# C^m seminorms


def cm_norm(section, m, r):
    """Max over subball nodes of all mixed derivatives of total order <= m.

    Works on a GridSection (complex scalar); derivative magnitudes are
    moduli, derivatives are centered second-order stencils.
    """
    return cm_norm_field(section.domain, section.values, m, r)


def cm_norm_field(domain, values, m, r):
    """cm_norm for a raw array on the grid; trailing non-grid axes (tensor
    components) are reduced with max-abs."""
    if m < 0 or m > 3:
        raise ValueError("seminorm order must be in 0..3")
    d = 2 * domain.n
    if r + m * domain.h > domain.radius * (1 + 1e-12):
        raise ValueError("subball too large for the derivative stencils")
    values = np.asarray(values)
    comp_axes = tuple(range(d, values.ndim))
    sub = domain.subball_mask(r)
    best = 0.0
    for orders in multi_indices(d, m):
        der = fd_mixed(values, orders, domain.h)
        mag = np.abs(der)
        if comp_axes:
            mag = mag.max(axis=comp_axes)
        mask = sub & central_valid_mask(domain.grid_shape, orders)
        if not np.any(mask):
            raise ValueError("no valid nodes for a requested derivative")
        best = max(best, float(mag[mask].max()))
    return best


# ---------------------------------------------------------------------------
# evaluation helpers (off-grid values and derivatives of sections)


def _interp(domain, array, pts):
    """Multilinear interpolation of a grid array at points (..., 2n)."""
    pts = np.asarray(pts, dtype=np.float64)
    d = 2 * domain.n
    u = (pts + domain.radius) / domain.h
    u = np.clip(u, 0.0, domain.points_per_axis - 1 - 1e-12)
    i0 = np.floor(u).astype(np.int64)
    frac = u - i0
    out = 0.0
    for corner in range(1 << d):
        idx = []
        w = 1.0
        for axis in range(d):
            bit = (corner >> axis) & 1
            idx.append(i0[..., axis] + bit)
            w = w * (frac[..., axis] if bit else 1.0 - frac[..., axis])
        out = out + w * array[tuple(idx)]
    return out


def section_values(s, pts):
    if s.evaluator is not None:
        return np.asarray(s.evaluator(pts), dtype=np.complex128)
    return _interp(s.domain, s.values, pts)


def _eval_shifted(s, pts, shifts):
    """Evaluate at pts + shift for a batch of shift vectors; (len(shifts), ...)."""
    pts = np.asarray(pts, dtype=np.float64)
    stacked = pts[None, ...] + np.asarray(shifts, dtype=np.float64).reshape(
        (len(shifts),) + (1,) * (pts.ndim - 1) + (pts.shape[-1],)
    )
    return section_values(s, stacked)


def section_jacobian(s, pts, step=None):
    """Complex gradient (d/dcoord sigma) at points, shape (..., 2n).

    Analytic partials when the section is closed form, otherwise centered
    differences of the evaluator (or the interpolant as a last resort).
    """
    pts = np.asarray(pts, dtype=np.float64)
    d = 2 * s.domain.n
    if s.partials is not None:
        return np.stack([np.asarray(s.partials(pts, i)) for i in range(d)], axis=-1)
    h = s.domain.h / 2 if step is None else step
    shifts = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        shifts.extend([e, -e])
    vals = _eval_shifted(s, pts, shifts)
    grads = [(vals[2 * i] - vals[2 * i + 1]) / (2 * h) for i in range(d)]
    return np.stack(grads, axis=-1)


def section_hessian(s, pts, step=None):
    """Complex Hessian (d^2 sigma / dcoord_i dcoord_j), shape (..., 2n, 2n)."""
    pts = np.asarray(pts, dtype=np.float64)
    d = 2 * s.domain.n
    if s.second_partials is not None:
        H = np.empty(pts.shape[:-1] + (d, d), dtype=np.complex128)
        for i in range(d):
            for j in range(i, d):
                val = np.asarray(s.second_partials(pts, i, j))
                H[..., i, j] = val
                H[..., j, i] = val
        return H
    h = s.domain.h / 2 if step is None else step
    center = section_values(s, pts)
    H = np.empty(pts.shape[:-1] + (d, d), dtype=np.complex128)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        vp, vm = _eval_shifted(s, pts, [ei, -ei])
        H[..., i, i] = (vp - 2 * center + vm) / h**2
    for i in range(d):
        for j in range(i + 1, d):
            ei = np.zeros(d)
            ej = np.zeros(d)
            ei[i] = h
            ej[j] = h
            vpp, vpm, vmp, vmm = _eval_shifted(s, pts, [ei + ej, ei - ej, -ei + ej, -ei - ej])
            val = (vpp - vpm - vmp + vmm) / (4 * h**2)
            H[..., i, j] = val
            H[..., j, i] = val
    return H


def covariant_jacobian(s, pts, step=None):
    """Real 2 x 2n matrix of the covariant differential of (Re, Im) sigma."""
    grad = section_jacobian(s, pts, step=step)
    coeffs = _model_coefficients(pts)
    cov = grad + coeffs * section_values(s, pts)[..., None]
    return np.stack([cov.real, cov.imag], axis=-2)


def _sv_2xM(J):
    """Both singular values of real (..., 2, M) matrices, closed form."""
    G = J @ np.swapaxes(J, -1, -2)
    a, b, c = G[..., 0, 0], G[..., 0, 1], G[..., 1, 1]
    mean = (a + c) / 2.0
    rad = np.sqrt(np.maximum(((a - c) / 2.0) ** 2 + b**2, 0.0))
    lo = np.sqrt(np.maximum(mean - rad, 0.0))
    hi = np.sqrt(np.maximum(mean + rad, 0.0))
    return hi, lo


# ---------------------------------------------------------------------------
# transversality margin


def transversality_margin(section, eps, r=None):
    """Quantitative transversality margin over the near-zero set.

    Over ball nodes with |sigma| <= eps, returns the minimum smallest
    singular value of the real 2 x 2n covariant differential; +inf when no
    node is that small (flagged by the caller).  Derivatives are analytic
    for closed forms and grid stencils otherwise (never per-node evaluator
    calls; this runs over large near-zero node sets).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    dom = section.domain
    d = 2 * dom.n
    mask = dom.ball_mask if r is None else dom.subball_mask(r)
    mask = mask & central_valid_mask(dom.grid_shape, (1,) * d)
    near = mask & (np.abs(section.values) <= eps)
    if not np.any(near):
        return float("inf")
    pts = dom.points[near]
    if section.partials is not None:
        grad = np.stack([np.asarray(section.partials(pts, i)) for i in range(d)], axis=-1)
    else:
        grad = np.stack([fd_axis(section.values, i, 1, dom.h)[near] for i in range(d)], axis=-1)
    cov = grad + _model_coefficients(pts) * section.values[near][..., None]
    J = np.stack([cov.real, cov.imag], axis=-2)
    _, lo = _sv_2xM(J)
    return float(lo.min())


# ---------------------------------------------------------------------------
# zero locus extraction


@dataclass(frozen=True)
class ZeroLocus:
    """Refined zeros of a section with tangent data and bookkeeping counts."""

    section: GridSection
    points: np.ndarray        # (P, 2n), inside the open ball
    tangents: np.ndarray      # (P, 2n, 2n-2) orthonormal kernel bases
    residuals: np.ndarray     # (P,) |sigma| at the refined points
    degenerate: np.ndarray    # (P,) bool, differential near-singular
    counts: dict

    def __len__(self):
        return self.points.shape[0]


def _seed_cells(values, trim_mask):
    re, im = values.real, values.imag
    lo_re = re
    hi_re = re
    lo_im = im
    hi_im = im
    d = values.ndim
    for axis in range(d):
        sl0 = [slice(None)] * d
        sl1 = [slice(None)] * d
        sl0[axis] = slice(0, -1)
        sl1[axis] = slice(1, None)
        lo_re = np.minimum(lo_re[tuple(sl0)], lo_re[tuple(sl1)])
        hi_re = np.maximum(hi_re[tuple(sl0)], hi_re[tuple(sl1)])
        lo_im = np.minimum(lo_im[tuple(sl0)], lo_im[tuple(sl1)])
        hi_im = np.maximum(hi_im[tuple(sl0)], hi_im[tuple(sl1)])
    hits = (lo_re <= 0) & (hi_re >= 0) & (lo_im <= 0) & (hi_im >= 0)
    return hits & trim_mask


def zero_locus(section, max_iter=50, resid_rel=1e-10, accept_rel=1e-8, dedupe_factor=0.5):
    """Extract and refine the zero set of a section.

    Seeds come from grid cells where both real and imaginary parts change
    sign; each seed is refined by damped Gauss-Newton on |sigma|^2 using
    the differential of sigma.  Zeros within 2h of the ball boundary are
    trimmed; non-convergent seeds are dropped and counted.
    """
    dom = section.domain
    d = 2 * dom.n
    h = dom.h
    scale = section.sup_norm()
    if scale == 0:
        raise ValueError("cannot extract the zero locus of the zero section")
    inner_radius = dom.radius - 2 * h

    cell_centers = dom.points[(slice(0, -1),) * d] + 0.5 * h
    cell_r2 = np.sum(cell_centers**2, axis=-1)
    trim_mask = cell_r2 <= inner_radius**2
    hits = _seed_cells(section.values, trim_mask)
    n_trimmed = int(np.count_nonzero(_seed_cells(section.values, ~trim_mask)))
    seeds = cell_centers[hits]
    counts = {"seeds": int(seeds.shape[0]), "trimmed_cells": n_trimmed}
    if seeds.shape[0] == 0:
        return ZeroLocus(
            section,
            np.zeros((0, d)),
            np.zeros((0, d, d - 2)),
            np.zeros(0),
            np.zeros(0, dtype=bool),
            counts | {"converged": 0, "dropped": 0, "deduped": 0},
        )

    pts = seeds.copy()
    active = np.ones(pts.shape[0], dtype=bool)
    resid = np.abs(section_values(section, pts))
    target = resid_rel * scale
    for _ in range(max_iter):
        movable = active & (resid > target)
        if not np.any(movable):
            break
        cur = pts[movable]
        vals = section_values(section, cur)
        J = covariant_jacobian(section, cur)
        F = np.stack([vals.real, vals.imag], axis=-1)
        G = J @ np.swapaxes(J, -1, -2)
        # minimal-norm Gauss-Newton step: -J^T (J J^T)^{-1} F, damped
        tr = np.trace(G, axis1=-2, axis2=-1)
        G = G + (1e-14 * (tr + 1e-300))[..., None, None] * np.eye(2)
        step = -np.einsum("...ji,...j->...i", J, np.linalg.solve(G, F[..., None])[..., 0])
        lam = np.ones(cur.shape[0])
        base = np.abs(vals)
        new_pts = cur.copy()
        new_res = base.copy()
        todo = np.ones(cur.shape[0], dtype=bool)
        for _bt in range(20):
            if not np.any(todo):
                break
            trial = cur[todo] + lam[todo, None] * step[todo]
            tr_res = np.abs(section_values(section, trial))
            better = tr_res < base[todo]
            sel = np.where(todo)[0]
            acc = sel[better]
            new_pts[acc] = trial[better]
            new_res[acc] = tr_res[better]
            todo[acc] = False
            lam[todo] *= 0.5
        stalled = todo & (base <= new_res)
        pts[movable] = new_pts
        resid[movable] = new_res
        idx = np.where(movable)[0]
        active[idx[stalled]] = False

    converged = resid <= accept_rel * scale
    inside = np.linalg.norm(pts, axis=-1) < inner_radius
    keep = converged & inside
    counts["dropped"] = int(np.count_nonzero(~keep))
    pts = pts[keep]
    resid = resid[keep]

    # dedupe: keep one representative per cluster of radius dedupe_factor*h
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    resid = resid[order]
    chosen = []
    for i in range(pts.shape[0]):
        p = pts[i]
        if all(np.linalg.norm(p - pts[j]) > dedupe_factor * h for j in chosen):
            chosen.append(i)
    counts["deduped"] = int(pts.shape[0] - len(chosen))
    pts = pts[chosen]
    resid = resid[chosen]
    counts["converged"] = int(pts.shape[0])

    if pts.shape[0] == 0:
        return ZeroLocus(
            section, pts, np.zeros((0, d, d - 2)), resid, np.zeros(0, dtype=bool), counts
        )
    J = covariant_jacobian(section, pts)
    U, S, Vt = np.linalg.svd(J, full_matrices=True)
    tangents = np.swapaxes(Vt[:, 2:, :], -1, -2)
    degenerate = (S[:, 1] < 1e-6 * np.maximum(S[:, 0], scale)) | (S[:, 0] < 1e-9 * scale)
    counts["degenerate"] = int(np.count_nonzero(degenerate))
    return ZeroLocus(section, pts, tangents, resid, degenerate, counts)


def hausdorff_to_reference(locus, reference_points):
    """Two-sided Hausdorff distance between locus points and a reference cloud."""
    if len(locus) == 0 or len(reference_points) == 0:
        return float("inf")
    A = locus.points
    B = np.asarray(reference_points, dtype=np.float64)
    d2 = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)
    d_ab = np.sqrt(d2.min(axis=1)).max()
    d_ba = np.sqrt(d2.min(axis=0)).max()
    return float(max(d_ab, d_ba))


# ---------------------------------------------------------------------------
# symplecticity of the sampled locus


def symplectic_margin(locus, omega):
    """Minimum smallest singular value of omega restricted to locus tangents.

    ``omega`` is a constant (2n, 2n) matrix or a callable points -> matrices.
    For n = 1 the locus is 0-dimensional and the verdict is trivially true:
    returns +inf (flagged by callers), never computed.
    """
    n = locus.section.domain.n
    if n < 2:
        return float("inf")
    usable = ~locus.degenerate
    if not np.any(usable):
        raise ValueError("no nondegenerate locus points with tangent data")
    T = locus.tangents[usable]
    pts = locus.points[usable]
    Om = omega(pts) if callable(omega) else np.broadcast_to(np.asarray(omega), (pts.shape[0],) + np.shape(omega))
    B = np.swapaxes(T, -1, -2) @ Om @ T
    sv = np.linalg.svd(B, compute_uv=False)
    return float(sv[..., -1].min())


# ---------------------------------------------------------------------------
# curvature of the zero set (Gauss equation for an implicit submanifold)


def curvature_estimate(locus, section=None, ambient_metric=None, step=None):
    """Supremum of |sectional curvature| of the zero set over locus points
    and tangent 2-planes spanned by the stored orthonormal bases.

    The second fundamental form comes from the Hessian of the defining map
    F = (Re sigma, Im sigma): II(u, v) = -J_F^+ (u^T H_F v); curvatures use
    the Gauss equation in the ambient flat chart metric (the rescaled
    coordinates already carry the g_k scaling).
    """
    sec = locus.section if section is None else section
    n = sec.domain.n
    if n < 2:
        raise ValueError("curvature of a 0-dimensional zero set is vacuous (n >= 2 required)")
    usable = ~locus.degenerate
    if not np.any(usable):
        raise ValueError("no nondegenerate locus points")
    pts = locus.points[usable]
    T = locus.tangents[usable]

    grad = section_jacobian(sec, pts, step=step)
    hess = section_hessian(sec, pts, step=step)
    J = np.stack([grad.real, grad.imag], axis=-2)              # (P, 2, 2n)
    H = np.stack([hess.real, hess.imag], axis=-3)              # (P, 2, 2n, 2n)
    Jp = np.linalg.pinv(J)                                     # (P, 2n, 2)

    m = T.shape[-1]
    # II[p, a, b, :] for tangent basis pair (a, b)
    HT = np.einsum("...cij,...ia,...jb->...cab", H, T, T)      # (P, 2, m, m)
    II = -np.einsum("...ic,...cab->...abi", Jp, HT)            # (P, m, m, 2n)

    if ambient_metric is None:
        dot = lambda u, v: np.sum(u * v, axis=-1)
    else:
        G = np.asarray(ambient_metric)
        dot = lambda u, v: np.einsum("...i,ij,...j->...", u, G, v)

    worst = 0.0
    for a in range(m):
        for b in range(a + 1, m):
            K = dot(II[:, a, a], II[:, b, b]) - dot(II[:, a, b], II[:, a, b])
            worst = max(worst, float(np.abs(K).max()))
    return worst


# ---------------------------------------------------------------------------
# report assembly


@dataclass
class DiagnosticsReport:
    """Flat list of named numeric verdicts, each carrying its resolution
    metadata and the tolerance it was checked against (when any)."""

    records: list = field(default_factory=list)

    def add(self, name, value, *, points_per_axis, h, tolerance=None, passed=None, **extra):
        value = float(value)
        if not (np.isfinite(value) or value == float("inf")):
            raise ValueError(f"record {name} has non-finite value {value}")
        rec = {
            "name": str(name),
            "value": value,
            "points_per_axis": int(points_per_axis),
            "h": float(h),
        }
        if tolerance is not None:
            rec["tolerance"] = float(tolerance)
        if passed is not None:
            rec["passed"] = bool(passed)
        for key, val in sorted(extra.items()):
            rec[key] = val
        self.records.append(rec)
        return rec

    def extend(self, other):
        self.records.extend(other.records)

    def all_passed(self):
        return all(r.get("passed", True) for r in self.records)

    def to_dict(self):
        return {"records": self.records}
