"""Grid domains on the ball in C^n, sections, connection fields, stencils.

Coordinate convention: a point of C^n is stored as a real vector of length
2n with interleaved layout (x_1, y_1, ..., x_n, y_n), so real axis 2a is
x_{a+1} and axis 2a+1 is y_{a+1}.  The standard complex structure acts as
J dx_a = dy_a.  Grids are regular tensor grids over the cube [-r, r]^{2n};
the domain's nodes are the grid points inside the closed ball of radius r
(the cube samples outside the ball are kept so centered stencils stay
available near the spherical boundary, but sup-type reductions only range
over ball nodes).
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


def as_complex(pts):
    """Real (..., 2n) coordinates -> complex (..., n)."""
    pts = np.asarray(pts, dtype=np.float64)
    return pts[..., 0::2] + 1j * pts[..., 1::2]


def as_real(z):
    """Complex (..., n) coordinates -> real (..., 2n) interleaved."""
    z = np.asarray(z, dtype=np.complex128)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],), dtype=np.float64)
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def standard_symplectic(n):
    """Matrix of sum_a dx_a ^ dy_a: omega(u, v) = u @ O @ v."""
    O = np.zeros((2 * n, 2 * n))
    for a in range(n):
        O[2 * a, 2 * a + 1] = 1.0
        O[2 * a + 1, 2 * a] = -1.0
    return O


def standard_complex_structure(n):
    """Matrix of J with J dx = dy: J e_{x_a} = e_{y_a}, J e_{y_a} = -e_{x_a}."""
    J = np.zeros((2 * n, 2 * n))
    for a in range(n):
        J[2 * a + 1, 2 * a] = 1.0
        J[2 * a, 2 * a + 1] = -1.0
    return J


@dataclass(frozen=True)
class BallDomain:
    """Regular grid over the cube circumscribing the radius-``radius`` ball."""

    n: int
    radius: float = 1.0
    points_per_axis: int = 33

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("complex dimension must be >= 1")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.points_per_axis < 5:
            raise ValueError("need at least 5 points per axis for stencils")

    @property
    def h(self):
        return 2.0 * self.radius / (self.points_per_axis - 1)

    @property
    def grid_shape(self):
        return (self.points_per_axis,) * (2 * self.n)

    @cached_property
    def axis(self):
        return np.linspace(-self.radius, self.radius, self.points_per_axis)

    @cached_property
    def points(self):
        """Real coordinates, shape grid_shape + (2n,)."""
        grids = np.meshgrid(*([self.axis] * (2 * self.n)), indexing="ij")
        return np.stack(grids, axis=-1)

    @cached_property
    def complex_points(self):
        return as_complex(self.points)

    @cached_property
    def radius_sq_field(self):
        return np.sum(self.points**2, axis=-1)

    @cached_property
    def ball_mask(self):
        """Nodes of the domain: grid points in the closed ball."""
        return self.radius_sq_field <= self.radius**2 * (1 + 1e-12)

    def subball_mask(self, r):
        if r > self.radius:
            raise ValueError("subball radius exceeds domain radius")
        return self.radius_sq_field <= r**2 * (1 + 1e-12)

    def interior_mask(self, margin_nodes):
        """Cube-interior nodes with at least margin_nodes to every cube face."""
        m = np.zeros(self.grid_shape, dtype=bool)
        if margin_nodes == 0:
            m[...] = True
            return m
        sl = (slice(margin_nodes, -margin_nodes),) * (2 * self.n)
        m[sl] = True
        return m

    def node_index(self, point):
        """Grid index of a point that coincides with a node, else ValueError."""
        point = np.asarray(point, dtype=np.float64)
        idx = (point + self.radius) / self.h
        rounded = np.rint(idx)
        if np.max(np.abs(idx - rounded)) > 1e-8:
            raise ValueError(f"point {point} is not a grid node")
        if np.any(rounded < 0) or np.any(rounded > self.points_per_axis - 1):
            raise ValueError(f"point {point} outside the grid")
        return tuple(int(i) for i in rounded)


# ---------------------------------------------------------------------------
# finite differences
#
# Central second-order stencils on interior nodes; one-sided second-order at
# cube edges is available for diagnostics only.  Third derivatives use the
# five-point central stencil (radius 2).

_STENCIL_RADIUS = {0: 0, 1: 1, 2: 1, 3: 2}


def _shift(values, axis, offset):
    out = np.roll(values, -offset, axis=axis)
    return out


def fd_axis(values, axis, order, h, one_sided_edges=False):
    """Partial derivative of given order along one axis, same-shape output.

    Nodes where the central stencil does not fit are filled with one-sided
    second-order values when ``one_sided_edges`` is set and are garbage
    otherwise; use :func:`fd_central_margin` to mask them off.
    """
    if order == 0:
        return values
    if order not in _STENCIL_RADIUS:
        raise ValueError("supported derivative orders: 0..3")
    v = values
    if order == 1:
        out = (_shift(v, axis, 1) - _shift(v, axis, -1)) / (2 * h)
    elif order == 2:
        out = (_shift(v, axis, 1) - 2 * v + _shift(v, axis, -1)) / h**2
    else:  # order == 3
        out = (
            _shift(v, axis, 2) - 2 * _shift(v, axis, 1) + 2 * _shift(v, axis, -1) - _shift(v, axis, -2)
        ) / (2 * h**3)
    if one_sided_edges and order in (1, 2):
        nd = v.ndim
        idx_lo = [slice(None)] * nd
        idx_hi = [slice(None)] * nd

        def take(i):
            sl = [slice(None)] * nd
            sl[axis] = i
            return v[tuple(sl)]

        if order == 1:
            lo = (-3 * take(0) + 4 * take(1) - take(2)) / (2 * h)
            hi = (3 * take(-1) - 4 * take(-2) + take(-3)) / (2 * h)
        else:
            lo = (2 * take(0) - 5 * take(1) + 4 * take(2) - take(3)) / h**2
            hi = (2 * take(-1) - 5 * take(-2) + 4 * take(-3) - take(-4)) / h**2
        idx_lo[axis] = 0
        idx_hi[axis] = -1
        out[tuple(idx_lo)] = lo
        out[tuple(idx_hi)] = hi
    return out


def fd_mixed(values, orders, h, one_sided_edges=False):
    """Mixed partial with per-axis derivative orders (sequence of ints)."""
    out = values
    for axis, order in enumerate(orders):
        if order:
            out = fd_axis(out, axis, order, h, one_sided_edges=one_sided_edges)
    return out


def fd_central_margin(orders):
    """Per-axis node margin within which fd_mixed output is purely central."""
    return tuple(_STENCIL_RADIUS[o] for o in orders)


def central_valid_mask(grid_shape, orders):
    mask = np.ones(grid_shape, dtype=bool)
    for axis, o in enumerate(orders):
        r = _STENCIL_RADIUS[o]
        if r == 0:
            continue
        sl = [slice(None)] * len(grid_shape)
        sl[axis] = slice(0, r)
        mask[tuple(sl)] = False
        sl[axis] = slice(grid_shape[axis] - r, grid_shape[axis])
        mask[tuple(sl)] = False
    return mask


def multi_indices(num_axes, max_total):
    """All derivative multi-indices with total order in [0, max_total]."""
    out = [()]
    for _ in range(num_axes):
        out = [t + (o,) for t in out for o in range(max_total + 1 - sum(t))]
    return sorted(out, key=lambda t: (sum(t), t))


# ---------------------------------------------------------------------------
# sections and connection fields


@dataclass(frozen=True)
class GridSection:
    """Complex scalar samples on a BallDomain grid.

    ``evaluator`` (points -> values) makes the section evaluable off the
    grid; ``partials`` (points, axis -> d/dcoord values) marks the section
    closed-form and enables analytic derivatives.  Sampled sections fall
    back to grid stencils.
    """

    domain: BallDomain
    values: np.ndarray
    evaluator: object = None
    partials: object = None
    second_partials: object = None
    label: str = ""
    flags: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != self.domain.grid_shape:
            raise ValueError(f"values shape {values.shape} != grid {self.domain.grid_shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("section has non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def is_closed_form(self):
        return self.partials is not None

    @classmethod
    def from_evaluator(cls, domain, evaluator, partials=None, second_partials=None, label="", flags=()):
        values = np.asarray(evaluator(domain.points), dtype=np.complex128)
        return cls(domain, values, evaluator, partials, second_partials, label, flags)

    def with_values(self, values, label=None):
        return GridSection(self.domain, values, label=self.label if label is None else label)

    def __add__(self, other):
        self._check_same_domain(other)
        return GridSection(self.domain, self.values + other.values)

    def __sub__(self, other):
        self._check_same_domain(other)
        return GridSection(self.domain, self.values - other.values)

    def __mul__(self, c):
        return GridSection(self.domain, self.values * c)

    __rmul__ = __mul__

    def _check_same_domain(self, other):
        if other.domain != self.domain:
            raise ValueError("sections live on different grids")

    def sup_norm(self, r=None):
        mask = self.domain.ball_mask if r is None else self.domain.subball_mask(r)
        return float(np.max(np.abs(self.values)[mask]))


@dataclass(frozen=True)
class ConnectionField:
    """Unitary connection 1-form A = sum_i a_i(z) dxi_i on a ball domain.

    ``coefficients``: points (..., 2n) -> (..., 2n) purely imaginary complex.
    ``coefficient_jacobian`` (optional): points -> (..., 2n, 2n) with entry
    [i, j] = d a_i / d coord_j, enabling analytic curvature.  Sampled fields
    pass ``sampled_coefficients`` instead of an evaluator.
    """

    domain: BallDomain
    coefficients: object = None
    coefficient_jacobian: object = None
    sampled_coefficients: np.ndarray = None
    label: str = ""

    def __post_init__(self):
        if self.coefficients is None and self.sampled_coefficients is None:
            raise ValueError("need a coefficient evaluator or sampled coefficients")
        if self.sampled_coefficients is not None:
            arr = np.asarray(self.sampled_coefficients, dtype=np.complex128)
            expected = self.domain.grid_shape + (2 * self.domain.n,)
            if arr.shape != expected:
                raise ValueError(f"sampled coefficients shape {arr.shape} != {expected}")
            object.__setattr__(self, "sampled_coefficients", arr)

    @property
    def is_closed_form(self):
        return self.coefficients is not None

    def coeffs_at(self, pts):
        if self.coefficients is not None:
            return np.asarray(self.coefficients(pts), dtype=np.complex128)
        raise ValueError("sampled connection field has no off-grid evaluator")

    def coeffs_on_grid(self):
        if self.sampled_coefficients is not None:
            return self.sampled_coefficients
        return self.coeffs_at(self.domain.points)

    def __call__(self, pts, v):
        """Contract the form at pts with tangent vector(s) v."""
        pts = np.asarray(pts, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        if pts.shape[-1] != 2 * self.domain.n or v.shape[-1] != 2 * self.domain.n:
            raise ValueError("point/vector dimension mismatch with the domain")
        return np.sum(self.coeffs_at(pts) * v, axis=-1)
