"""Calculus of the model Hermitian line bundle over the unit ball in C^n.

The model connection is the radially flat unitary connection

    A = -i*pi * sum_a (x_a dy_a - y_a dx_a)

with constant curvature -2*pi*i per (x_a, y_a) plane.  A section is
"model holomorphic" when the (0,1) part of its covariant derivative
vanishes; equivalently its product with exp(+pi/2 |z|^2) is holomorphic in
the ordinary sense.  Sections of the form p(z) * exp(-pi/2 |z|^2) with p a
polynomial are the closed-form holomorphic family used throughout.
"""

import numpy as np

from . import kernels
from .geometry import (
    ConnectionField,
    GridSection,
    as_complex,
    central_valid_mask,
    fd_axis,
)

# ---------------------------------------------------------------------------
# model connection


def model_connection(z, v):
    """Model connection 1-form at z contracted with tangent vector v.

    Returns -i*pi * sum_a (x_a * v_{y_a} - y_a * v_{x_a}); purely imaginary,
    linear in v, zero on radial vectors.
    """
    z = np.asarray(z, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if z.shape[-1] != v.shape[-1] or z.shape[-1] % 2 != 0:
        raise ValueError("z and v must be real vectors of equal even dimension")
    x, y = z[..., 0::2], z[..., 1::2]
    vx, vy = v[..., 0::2], v[..., 1::2]
    return -1j * np.pi * np.sum(x * vy - y * vx, axis=-1)


def _model_coefficients(pts):
    pts = np.asarray(pts, dtype=np.float64)
    out = np.empty(pts.shape, dtype=np.complex128)
    out[..., 0::2] = 1j * np.pi * pts[..., 1::2]   # dx_a coefficient: +i pi y_a
    out[..., 1::2] = -1j * np.pi * pts[..., 0::2]  # dy_a coefficient: -i pi x_a
    return out


def _model_coefficient_jacobian(pts):
    pts = np.asarray(pts, dtype=np.float64)
    d = pts.shape[-1]
    jac = np.zeros(pts.shape[:-1] + (d, d), dtype=np.complex128)
    for a in range(d // 2):
        jac[..., 2 * a, 2 * a + 1] = 1j * np.pi
        jac[..., 2 * a + 1, 2 * a] = -1j * np.pi
    return jac


def model_connection_field(domain):
    return ConnectionField(
        domain,
        coefficients=_model_coefficients,
        coefficient_jacobian=_model_coefficient_jacobian,
        label="model",
    )


# ---------------------------------------------------------------------------
# derivatives of sections


def _resolve_mode(s, mode):
    if mode == "auto":
        return "analytic" if s.is_closed_form else "fd"
    if mode == "analytic" and not s.is_closed_form:
        raise ValueError("analytic mode requires a closed-form section")
    return mode


def _fd_partial_at(s, z, axis, h):
    """Centered difference of the section along one real axis at point(s) z."""
    if s.evaluator is not None:
        zp = np.array(z, dtype=np.float64, copy=True)
        zm = np.array(z, dtype=np.float64, copy=True)
        zp[..., axis] += h
        zm[..., axis] -= h
        return (np.asarray(s.evaluator(zp)) - np.asarray(s.evaluator(zm))) / (2 * h)
    idx = s.domain.node_index(z)
    for i, p in zip(idx, s.domain.grid_shape):
        if i < 1 or i > p - 2:
            raise ValueError("finite-difference stencil exits the grid")
    up = list(idx)
    dn = list(idx)
    up[axis] += 1
    dn[axis] -= 1
    return (s.values[tuple(up)] - s.values[tuple(dn)]) / (2 * h)


def covariant_derivative(s, z, v, mode="auto", connection="model"):
    """Covariant derivative ds(v) + A(z)(v) * s(z) at a point.

    ``mode`` is 'analytic' (closed-form partials), 'fd' (centered
    second-order differences at spacing h), or 'auto'.  ``connection`` is
    'model', None (ordinary derivative), or a ConnectionField.
    """
    mode = _resolve_mode(s, mode)
    z = np.asarray(z, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d = 2 * s.domain.n
    if z.shape[-1] != d or v.shape[-1] != d:
        raise ValueError("point/vector dimension mismatch with the domain")
    h = s.domain.h
    if mode == "fd" and np.any(np.linalg.norm(z, axis=-1) > s.domain.radius - h + 1e-12):
        raise ValueError("finite-difference mode needs z at least h inside the ball")
    if mode == "analytic":
        ds = sum(np.asarray(s.partials(z, i)) * v[..., i] for i in range(d))
    else:
        ds = sum(_fd_partial_at(s, z, i, h) * v[..., i] for i in range(d))
    if connection is None:
        a_term = 0.0
    elif connection == "model":
        a_term = model_connection(z, v)
    else:
        a_term = connection(z, v)
    sz = s.evaluator(z) if s.evaluator is not None else s.values[s.domain.node_index(z)]
    result = ds + a_term * np.asarray(sz)
    if not np.all(np.isfinite(np.asarray(result))):
        raise FloatingPointError("non-finite covariant derivative")
    return result


def dbar_operator(s, z, mode="auto", connection="model"):
    """(0,1) part of the covariant derivative: components (grad_x + i grad_y)/2.

    Returns an n-vector; the section is holomorphic at z iff it vanishes.
    """
    n = s.domain.n
    z = np.asarray(z, dtype=np.float64)
    comps = []
    for a in range(n):
        ex = np.zeros(2 * n)
        ey = np.zeros(2 * n)
        ex[2 * a] = 1.0
        ey[2 * a + 1] = 1.0
        gx = covariant_derivative(s, z, ex, mode=mode, connection=connection)
        gy = covariant_derivative(s, z, ey, mode=mode, connection=connection)
        comps.append(0.5 * (gx + 1j * gy))
    return np.stack([np.asarray(c) for c in comps], axis=-1)


def dbar_field(s, mode="auto", connection="model"):
    """dbar components on the whole grid, plus the mask where they are valid."""
    mode = _resolve_mode(s, mode)
    dom = s.domain
    n = dom.n
    pts = dom.points
    if connection is None:
        coeffs = np.zeros(pts.shape, dtype=np.complex128)
    elif connection == "model":
        coeffs = _model_coefficients(pts)
    else:
        coeffs = connection.coeffs_at(pts)
    if mode == "analytic":
        grads = [np.asarray(s.partials(pts, i)) for i in range(2 * n)]
        valid = dom.ball_mask.copy()
    else:
        grads = [fd_axis(s.values, i, 1, dom.h) for i in range(2 * n)]
        valid = dom.ball_mask & central_valid_mask(dom.grid_shape, (1,) * (2 * n))
        valid &= dom.radius_sq_field <= (dom.radius - dom.h) ** 2 * (1 + 1e-12)
    out = np.empty(dom.grid_shape + (n,), dtype=np.complex128)
    for a in range(n):
        cov_x = grads[2 * a] + coeffs[..., 2 * a] * s.values
        cov_y = grads[2 * a + 1] + coeffs[..., 2 * a + 1] * s.values
        out[..., a] = 0.5 * (cov_x + 1j * cov_y)
    return out, valid


def dbar_defect(s, r=None, mode="auto", connection="model"):
    """Sup of |dbar s| over (sub)ball nodes where the stencil is valid."""
    field, valid = dbar_field(s, mode=mode, connection=connection)
    if r is not None:
        valid = valid & s.domain.subball_mask(r)
    if not np.any(valid):
        raise ValueError("no valid nodes for the dbar defect")
    return float(np.max(np.abs(field[valid])))


# ---------------------------------------------------------------------------
# Gaussian weight and the ordinary-holomorphy criterion


def _gaussian_weight(pts, sign):
    r2 = np.sum(np.asarray(pts, dtype=np.float64) ** 2, axis=-1)
    return np.exp(sign * 0.5 * np.pi * r2)


def unweight(s):
    """Multiply by exp(+pi/2 |z|^2).

    The result is ordinary-holomorphic exactly when s is model-holomorphic;
    reweighting its ordinary dbar by exp(-pi/2 |z|^2) reproduces dbar(s).
    """
    dom = s.domain
    values = s.values * _gaussian_weight(dom.points, +1.0)
    evaluator = None
    partials = None
    if s.evaluator is not None:
        base_eval = s.evaluator

        def evaluator(pts):
            return np.asarray(base_eval(pts)) * _gaussian_weight(pts, +1.0)

    if s.partials is not None:
        base_eval = s.evaluator
        base_partials = s.partials

        def partials(pts, axis):
            w = _gaussian_weight(pts, +1.0)
            coord = np.asarray(pts, dtype=np.float64)[..., axis]
            return (np.asarray(base_partials(pts, axis)) + np.pi * coord * np.asarray(base_eval(pts))) * w

    return GridSection(dom, values, evaluator, partials, label=f"unweight({s.label})" if s.label else "")


def reweighted_ordinary_dbar_defect(s, r=None, mode="auto"):
    """Sup of |exp(-pi/2 |z|^2) * ordinary_dbar(unweight(s))| over ball nodes."""
    u = unweight(s)
    field, valid = dbar_field(u, mode=mode, connection=None)
    weight = _gaussian_weight(s.domain.points, -1.0)
    if r is not None:
        valid = valid & s.domain.subball_mask(r)
    return float(np.max(np.abs(field[valid] * weight[valid][..., None])))


# ---------------------------------------------------------------------------
# polynomial coefficient tables (sparse maps keyed by exponent tuples)


def poly_normalize(table, n):
    out = {}
    for key, c in table.items():
        key = tuple(int(e) for e in key)
        if len(key) != n:
            raise ValueError(f"exponent tuple {key} has length != {n}")
        if any(e < 0 for e in key):
            raise ValueError("negative exponent")
        if c != 0:
            out[key] = out.get(key, 0) + complex(c)
    return {k: c for k, c in out.items() if c != 0}


def poly_diff_z(table, alpha):
    """d/dz_alpha of a coefficient table."""
    out = {}
    for key, c in table.items():
        e = key[alpha]
        if e > 0:
            down = key[:alpha] + (e - 1,) + key[alpha + 1 :]
            out[down] = out.get(down, 0) + c * e
    return out


def _poly_arrays(table, n):
    if not table:
        return np.zeros((0, n), dtype=np.int64), np.zeros((0,), dtype=np.complex128)
    keys = sorted(table)
    exps = np.array(keys, dtype=np.int64).reshape(len(keys), n)
    coeffs = np.array([table[k] for k in keys], dtype=np.complex128)
    return exps, coeffs


def poly_value(table, n, pts):
    exps, coeffs = _poly_arrays(table, n)
    return kernels.poly_eval(as_complex(pts), exps, coeffs)


def bargmann_section(poly, domain, label=""):
    """Closed-form section p(z) * exp(-pi/2 |z|^2) from a coefficient table.

    An empty (or identically zero) table yields the zero section, flagged
    'empty_polynomial'.
    """
    n = domain.n
    table = poly_normalize(dict(poly), n)
    flags = ()
    if not table:
        flags = ("empty_polynomial",)
    dz_tables = [poly_diff_z(table, a) for a in range(n)]
    dzz_tables = [[poly_diff_z(dz_tables[a], b) for b in range(n)] for a in range(n)]

    def evaluator(pts):
        return poly_value(table, n, pts) * _gaussian_weight(pts, -1.0)

    def _dpoly(pts, axis):
        alpha, is_y = divmod(axis, 2)
        val = poly_value(dz_tables[alpha], n, pts)
        return 1j * val if is_y else val

    def _ddpoly(pts, axis_i, axis_j):
        ai, yi = divmod(axis_i, 2)
        aj, yj = divmod(axis_j, 2)
        val = poly_value(dzz_tables[ai][aj], n, pts)
        factor = (1j if yi else 1) * (1j if yj else 1)
        return factor * val

    def partials(pts, axis):
        w = _gaussian_weight(pts, -1.0)
        coord = np.asarray(pts, dtype=np.float64)[..., axis]
        return (_dpoly(pts, axis) - np.pi * coord * poly_value(table, n, pts)) * w

    def second_partials(pts, axis_i, axis_j):
        w = _gaussian_weight(pts, -1.0)
        p = np.asarray(pts, dtype=np.float64)
        xi, xj = p[..., axis_i], p[..., axis_j]
        pv = poly_value(table, n, pts)
        di = _dpoly(pts, axis_i)
        dj = _dpoly(pts, axis_j)
        dij = _ddpoly(pts, axis_i, axis_j)
        delta = 1.0 if axis_i == axis_j else 0.0
        return (dij - np.pi * (delta * pv + xi * dj + xj * di) + np.pi**2 * xi * xj * pv) * w

    return GridSection.from_evaluator(
        domain, evaluator, partials=partials, second_partials=second_partials, label=label, flags=flags
    )


# ---------------------------------------------------------------------------
# curvature and radial flatness


def curvature_of(A, z, mode="auto"):
    """Exterior derivative dA at an interior point, as the (2n, 2n) table
    F[i, j] = d_i a_j - d_j a_i (antisymmetric).
    """
    z = np.asarray(z, dtype=np.float64)
    d = 2 * A.domain.n
    if mode == "auto":
        mode = "analytic" if A.coefficient_jacobian is not None else "fd"
    if mode == "analytic":
        if A.coefficient_jacobian is None:
            raise ValueError("connection has no analytic coefficient jacobian")
        jac = np.asarray(A.coefficient_jacobian(z))
    else:
        h = A.domain.h
        if np.linalg.norm(z) > A.domain.radius - 2 * h + 1e-12:
            raise ValueError("finite-difference curvature needs z at least 2h inside the ball")
        jac = np.empty((d, d), dtype=np.complex128)
        if A.is_closed_form:
            for jax in range(d):
                zp = z.copy()
                zm = z.copy()
                zp[jax] += h
                zm[jax] -= h
                jac[:, jax] = (A.coeffs_at(zp) - A.coeffs_at(zm)) / (2 * h)
        else:
            idx = A.domain.node_index(z)
            coeffs = A.coeffs_on_grid()
            for jax in range(d):
                up = list(idx)
                dn = list(idx)
                up[jax] += 1
                dn[jax] -= 1
                if dn[jax] < 0 or up[jax] >= A.domain.points_per_axis:
                    raise ValueError("finite-difference stencil exits the grid")
                jac[:, jax] = (coeffs[tuple(up)] - coeffs[tuple(dn)]) / (2 * h)
    return np.swapaxes(jac, -1, -2) - jac


def radial_flatness_defect(A):
    """Sup over ball nodes of |A(z)(z)|; zero for radially flat connections."""
    coeffs = A.coeffs_on_grid()
    contraction = np.sum(coeffs * A.domain.points, axis=-1)
    return float(np.max(np.abs(contraction)[A.domain.ball_mask]))
