"""Explicit prequantized Kahler backends with closed-form section families.

Two integrable backends realize the abstract setting:

* flat tori R^{2n}/Z^{2n} (n = 1, 2) with level-k theta sections of the
  prequantum power L^k, declared in the unitary gauge
  A_k = -i*pi*k sum (x dy - y dx) on the universal cover;
* the Fubini-Study line CP^1 scaled to unit total area (a round sphere of
  radius 1/(2 sqrt(pi))), with degree-k polynomial sections of O(k) in the
  unitary affine-chart gauge A_k = -i*k (x dy - y dx)/(1 + |w|^2).

Backend evaluators work on universal-cover / chart coordinates, so section
representatives are smooth along any path a chart produces; the deck and
chart-transition multipliers are exposed for gauge-consistency checks.
"""

import abc
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import as_complex, standard_complex_structure, standard_symplectic

SPHERE_RADIUS = 1.0 / (2.0 * np.sqrt(np.pi))  # CP^1 realization with unit area
CP1_CHART_LIMIT = 5.0  # |w| bound: 0.2 margin from the opposite pole in chart coords


class AtlasError(ValueError):
    """A path or evaluation point left the declared chart atlas."""


class PrequantizedKahler(abc.ABC):
    """Interface for an explicit prequantized almost-Kahler manifold.

    Implementations expose the compatible triple (g, omega, J) in a fixed
    coordinate system, a geodesic evaluator for g, and the unitary gauge of
    the L^k connection with its cocycle data.
    """

    n: int

    @abc.abstractmethod
    def metric(self, pts):
        """g as (..., 2n, 2n) at coordinate points."""

    @abc.abstractmethod
    def omega(self, pts):
        """Symplectic form as (..., 2n, 2n) antisymmetric matrices."""

    @abc.abstractmethod
    def complex_structure(self, pts):
        """J as (..., 2n, 2n)."""

    @abc.abstractmethod
    def geodesic_with_velocity(self, p, v, t):
        """Point and velocity of the g-geodesic from p with initial velocity v.

        p is a single point (2n,), v is (..., 2n), t broadcasts against v's
        leading shape.  Returns (positions, velocities), both (..., 2n).
        """

    def geodesic(self, p, v, t):
        return self.geodesic_with_velocity(p, v, t)[0]

    @abc.abstractmethod
    def connection_coefficients(self, k, pts):
        """Coefficients of the unitary gauge of the L^k connection, (..., 2n)."""

    @abc.abstractmethod
    def canonical_frame(self, p):
        """A g(p)-unitary, J-commuting identification of C^n with T_p, (2n, 2n)."""

    def connection_pairing(self, k, pts, vels):
        return np.sum(self.connection_coefficients(k, pts) * vels, axis=-1)

    def compatibility_defect(self, pts):
        """Max |g(u,v) - omega(u, Jv)| entry over the given points."""
        g = self.metric(pts)
        om = self.omega(pts)
        J = self.complex_structure(pts)
        return float(np.max(np.abs(g - om @ J)))


# ---------------------------------------------------------------------------
# flat torus


class TorusBackend(PrequantizedKahler):
    """R^{2n}/Z^{2n} with the flat metric; coordinates are cover coordinates."""

    def __init__(self, n):
        if n not in (1, 2):
            raise ValueError("torus backend supports n in {1, 2}")
        self.n = n
        self._omega = standard_symplectic(n)
        self._J = standard_complex_structure(n)

    def metric(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return np.broadcast_to(np.eye(2 * self.n), pts.shape[:-1] + (2 * self.n, 2 * self.n)).copy()

    def omega(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return np.broadcast_to(self._omega, pts.shape[:-1] + self._omega.shape).copy()

    def complex_structure(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return np.broadcast_to(self._J, pts.shape[:-1] + self._J.shape).copy()

    def geodesic_with_velocity(self, p, v, t):
        p = np.asarray(p, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        pos = p + t[..., None] * v if t.ndim else p + t * v
        vel = np.broadcast_to(v, pos.shape).copy()
        return pos, vel

    def wrap(self, pts):
        """Fundamental-domain representative in [0, 1)^{2n}."""
        return np.mod(np.asarray(pts, dtype=np.float64), 1.0)

    def exp_differential(self, p, v):
        """Differential of exp_p at velocity v: the identity (flat metric)."""
        v = np.asarray(v, dtype=np.float64)
        eye = np.eye(2 * self.n)
        return np.broadcast_to(eye, v.shape[:-1] + eye.shape).copy()

    def connection_coefficients(self, k, pts):
        pts = np.asarray(pts, dtype=np.float64)
        out = np.empty(pts.shape, dtype=np.complex128)
        out[..., 0::2] = 1j * np.pi * k * pts[..., 1::2]
        out[..., 1::2] = -1j * np.pi * k * pts[..., 0::2]
        return out

    def canonical_frame(self, p):
        return np.eye(2 * self.n)

    def deck_multiplier(self, k, axis, pts):
        """Cocycle e_lambda(z) of the gauge for the unit translation along a
        real axis: psi(z + e_axis) = e(z) * psi(z) for theta sections.
        """
        pts = np.asarray(pts, dtype=np.float64)
        alpha, is_y = divmod(axis, 2)
        if is_y:
            return -np.exp(-1j * np.pi * k * pts[..., 2 * alpha])
        return np.exp(1j * np.pi * k * pts[..., 2 * alpha + 1])


def torus_backend(n, lattice=None):
    """Flat torus backend on the identity lattice Z^n + i Z^n."""
    if lattice not in (None, "square", "identity"):
        raise ValueError("only the identity (square) lattice is supported")
    return TorusBackend(n)


# ---------------------------------------------------------------------------
# scaled Fubini-Study line


def _to_sphere(w):
    """Stereographic embedding of the affine chart onto the radius-R sphere."""
    x, y = w.real, w.imag
    d = 1.0 + x * x + y * y
    return np.stack([2 * x / d, 2 * y / d, (x * x + y * y - 1.0) / d], axis=-1) * SPHERE_RADIUS


def _from_sphere(P):
    denom = SPHERE_RADIUS - P[..., 2]
    # 2R/(1 + |w|^2) = denom, so the chart limit |w| <= L reads denom >= 2R/(1+L^2)
    if np.any(denom < 2.0 * SPHERE_RADIUS / (1.0 + CP1_CHART_LIMIT**2) * 0.999):
        raise AtlasError("point leaves the affine chart (too close to the opposite pole)")
    return (P[..., 0] + 1j * P[..., 1]) / denom


def _push_to_sphere(w, vc):
    """Differential of the stereographic embedding applied to a chart vector."""
    x, y = w.real, w.imag
    vx, vy = vc.real, vc.imag
    d = 1.0 + x * x + y * y
    f = SPHERE_RADIUS / d**2
    dSx = np.stack([2 * (1 + y * y - x * x), -4 * x * y, 4 * x], axis=-1) * f[..., None]
    dSy = np.stack([-4 * x * y, 2 * (1 + x * x - y * y), 4 * y], axis=-1) * f[..., None]
    return vx[..., None] * dSx + vy[..., None] * dSy


class CP1Backend(PrequantizedKahler):
    """CP^1 with the Fubini-Study structure scaled to unit total area.

    Coordinates are the affine chart w; geodesics are great circles of the
    round realization.  Experiments stay within |w| <= 5 (margin 0.2 from
    the opposite pole in the other chart's coordinates).
    """

    n = 1

    def _conformal(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        r2 = pts[..., 0] ** 2 + pts[..., 1] ** 2
        return 1.0 / (np.pi * (1.0 + r2) ** 2)

    def metric(self, pts):
        lam = self._conformal(pts)
        return lam[..., None, None] * np.eye(2)

    def omega(self, pts):
        lam = self._conformal(pts)
        return lam[..., None, None] * standard_symplectic(1)

    def complex_structure(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return np.broadcast_to(standard_complex_structure(1), pts.shape[:-1] + (2, 2)).copy()

    def geodesic_with_velocity(self, p, v, t):
        p = np.asarray(p, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        w0 = complex(p[0], p[1])
        vc = v[..., 0] + 1j * v[..., 1]
        t = np.broadcast_to(t, vc.shape)

        P0 = _to_sphere(np.asarray(w0))
        V = _push_to_sphere(np.full(vc.shape, w0), vc)
        speed = np.linalg.norm(V, axis=-1)
        safe = np.where(speed > 0, speed, 1.0)
        Phat = P0 / SPHERE_RADIUS
        Ehat = V / safe[..., None]
        ang = speed * t / SPHERE_RADIUS
        ca, sa = np.cos(ang)[..., None], np.sin(ang)[..., None]
        P = SPHERE_RADIUS * (ca * Phat + sa * Ehat)
        Pdot = speed[..., None] * (-sa * Phat + ca * Ehat)

        w = _from_sphere(P)
        denom = SPHERE_RADIUS - P[..., 2]
        wdot = (Pdot[..., 0] + 1j * Pdot[..., 1]) / denom + (P[..., 0] + 1j * P[..., 1]) * Pdot[..., 2] / denom**2
        wdot = np.where(speed > 0, wdot, 0.0)

        pos = np.stack([w.real, w.imag], axis=-1)
        vel = np.stack([wdot.real, wdot.imag], axis=-1)
        return pos, vel

    def connection_coefficients(self, k, pts):
        pts = np.asarray(pts, dtype=np.float64)
        x, y = pts[..., 0], pts[..., 1]
        if np.any(x * x + y * y > CP1_CHART_LIMIT**2 * (1 + 1e-9)):
            raise AtlasError("evaluation point leaves the affine chart")
        scale = 1.0 / (1.0 + x * x + y * y)
        out = np.empty(pts.shape, dtype=np.complex128)
        out[..., 0] = 1j * k * y * scale
        out[..., 1] = -1j * k * x * scale
        return out

    def canonical_frame(self, p):
        p = np.asarray(p, dtype=np.float64)
        s = np.sqrt(np.pi) * (1.0 + p[0] ** 2 + p[1] ** 2)
        return s * np.eye(2)

    def transition_multiplier(self, k, pts):
        """Unitary gauge transition to the opposite chart w' = 1/w."""
        w = as_complex(np.asarray(pts, dtype=np.float64))[..., 0]
        return (np.conj(w) / np.abs(w)) ** k


def cp1_backend(normalization="unit-area"):
    if normalization not in ("unit-area", "unit_area", None):
        raise ValueError("only the unit total area normalization is supported")
    return CP1Backend()


# ---------------------------------------------------------------------------
# section families


@dataclass(frozen=True)
class SectionFamily:
    """A closed-form section of L^k over a backend, in the declared gauge.

    ``evaluator`` maps cover/chart coordinate points (..., 2n) to complex
    values of the section's gauge representative.
    """

    backend: PrequantizedKahler
    k: int
    evaluator: object
    label: str = ""
    index_data: tuple = ()

    def __call__(self, pts):
        return np.asarray(self.evaluator(pts), dtype=np.complex128)


def theta_value(z, k, j):
    """Unitary-gauge value of the level-k theta basis element at cover points.

    The series convention carries characteristics (j/k, 1/2); its index-j
    element has k simple zeros per fundamental domain, on the horizontal
    line y = 1/2 - j/k (mod 1), at x = mu/k.  For j = k/2 (k even) the
    origin is a zero, exactly, by pairwise cancellation.  The kernel folds
    the gauge weight exp(pi*k*(z^2 - |z|^2)/2) into the lattice terms.
    """
    z = np.asarray(z, dtype=np.complex128)
    return kernels.theta_sum(z, k, j)


def theta_section(k, j, backend):
    """Level-k theta basis element on the n=1 torus."""
    if not isinstance(backend, TorusBackend) or backend.n != 1:
        raise ValueError("theta_section needs the n=1 torus backend")
    if k < 1:
        raise ValueError("k must be a positive integer")
    if not (0 <= j < k):
        raise ValueError(f"theta index j={j} out of range [0, {k})")

    def evaluator(pts):
        z = as_complex(np.asarray(pts, dtype=np.float64))[..., 0]
        return theta_value(z, k, j)

    return SectionFamily(backend, k, evaluator, label=f"theta(k={k}, j={j})", index_data=(j,))


def theta_product_section(k, terms, backend):
    """Linear combination of products of two n=1 theta factors, on the n=2 torus.

    ``terms`` is an iterable of (coefficient, j1, j2).
    """
    if not isinstance(backend, TorusBackend) or backend.n != 2:
        raise ValueError("theta_product_section needs the n=2 torus backend")
    terms = tuple((complex(c), int(j1), int(j2)) for c, j1, j2 in terms)
    if not terms:
        raise ValueError("need at least one product term")
    for _, j1, j2 in terms:
        if not (0 <= j1 < k and 0 <= j2 < k):
            raise ValueError("theta index out of range [0, k)")

    def evaluator(pts):
        z = as_complex(np.asarray(pts, dtype=np.float64))
        tot = 0
        for c, j1, j2 in terms:
            tot = tot + c * theta_value(z[..., 0], k, j1) * theta_value(z[..., 1], k, j2)
        return tot

    return SectionFamily(backend, k, evaluator, label=f"theta-product(k={k})", index_data=terms)


def cp1_section(k, coeffs, backend):
    """Degree-<=k polynomial section of O(k) in the affine-chart gauge."""
    if not isinstance(backend, CP1Backend):
        raise ValueError("cp1_section needs the CP^1 backend")
    coeffs = np.asarray(coeffs, dtype=np.complex128).reshape(-1)
    if coeffs.size == 0:
        raise ValueError("empty coefficient list")
    if coeffs.size - 1 > k:
        raise ValueError(f"polynomial degree {coeffs.size - 1} exceeds k={k}")
    exps = np.arange(coeffs.size, dtype=np.int64).reshape(-1, 1)

    def evaluator(pts):
        pts = np.asarray(pts, dtype=np.float64)
        w = as_complex(pts)
        p = kernels.poly_eval(w, exps, coeffs)
        r2 = pts[..., 0] ** 2 + pts[..., 1] ** 2
        return p * (1.0 + r2) ** (-k / 2.0)

    return SectionFamily(backend, k, evaluator, label=f"cp1-poly(k={k})", index_data=tuple(coeffs.tolist()))


# ---------------------------------------------------------------------------
# parallel transport

# The fiber coordinate satisfies c' = -A_k(path velocity) c.  Transport uses
# fixed-step classical RK4; unitarity is renormalized once at the end and
# the drift is reported, never corrected mid-path.


def _rk4_factors(a0, am, a1, dt):
    k1 = -a0
    k2 = -am * (1.0 + dt * k1 / 2.0)
    k3 = -am * (1.0 + dt * k2 / 2.0)
    k4 = -a1 * (1.0 + dt * k3)
    return 1.0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def transport_along_rays(backend, k, p, vels, nsteps):
    """Transport the fiber along t -> geodesic(p, vels, t), t in [0, 1].

    Batched over rays; returns (unit values, continuous log-phases, drift)
    where drift is the worst |modulus - 1| before the final renormalization.
    """
    vels = np.asarray(vels, dtype=np.float64)
    lead = vels.shape[:-1]
    c = np.ones(lead, dtype=np.complex128)
    phase = np.zeros(lead, dtype=np.float64)
    dt = 1.0 / nsteps

    def a_at(t):
        pos, vel = backend.geodesic_with_velocity(p, vels, t)
        return backend.connection_pairing(k, pos, vel)

    a_prev = a_at(0.0)
    for i in range(nsteps):
        t0 = i * dt
        am = a_at(t0 + dt / 2.0)
        a1 = a_at(t0 + dt)
        M = _rk4_factors(a_prev, am, a1, dt)
        c = c * M
        phase = phase + np.angle(M)
        a_prev = a1
    mod = np.abs(c)
    drift = float(np.max(np.abs(mod - 1.0)))
    return c / mod, phase, drift


def parallel_transport(backend, k, path, return_drift=False):
    """Transport along a sampled path, an (S+1, 2n) array of cover points.

    Segments are traversed as straight chords; output modulus is
    renormalized to 1 and the raw drift is available via ``return_drift``.
    """
    path = np.asarray(path, dtype=np.float64)
    if path.ndim != 2 or path.shape[-1] != 2 * backend.n:
        raise ValueError("path must be an (S+1, 2n) array of points")
    if isinstance(backend, CP1Backend):
        r2 = path[:, 0] ** 2 + path[:, 1] ** 2
        if np.any(r2 > CP1_CHART_LIMIT**2):
            raise AtlasError("path leaves atlas coverage")
    c = 1.0 + 0.0j
    drift_amp = 1.0
    for i in range(path.shape[0] - 1):
        p0, p1 = path[i], path[i + 1]
        vel = p1 - p0
        a0 = backend.connection_pairing(k, p0, vel)
        am = backend.connection_pairing(k, (p0 + p1) / 2.0, vel)
        a1 = backend.connection_pairing(k, p1, vel)
        M = _rk4_factors(a0, am, a1, 1.0)
        c *= M
        drift_amp *= abs(M)
    value = c / abs(c)
    if return_drift:
        return value, abs(drift_amp - 1.0)
    return value


def connection_curvature_fd(backend, k, p, h=1e-4):
    """Centered-difference exterior derivative of the declared L^k gauge at p."""
    p = np.asarray(p, dtype=np.float64)
    d = p.shape[-1]
    jac = np.empty((d, d), dtype=np.complex128)
    for jax in range(d):
        pp, pm = p.copy(), p.copy()
        pp[jax] += h
        pm[jax] -= h
        jac[:, jax] = (backend.connection_coefficients(k, pp) - backend.connection_coefficients(k, pm)) / (2 * h)
    return jac.T - jac
