"""Backend manifolds, theta and polynomial section families, transport."""

import numpy as np
import pytest

from bargmann_lens.backends import (
    SPHERE_RADIUS,
    AtlasError,
    connection_curvature_fd,
    cp1_backend,
    cp1_section,
    parallel_transport,
    theta_product_section,
    theta_section,
    theta_value,
    torus_backend,
)


# ---------------------------------------------------------------------------
# oracles


def winding_count(values):
    """Independent zero-count oracle: total phase turn of a closed sample loop."""
    ph = np.unwrap(np.angle(values))
    closure = (np.angle(values[0]) - np.angle(values[-1]) + np.pi) % (2 * np.pi) - np.pi
    return (ph[-1] - ph[0] + closure) / (2 * np.pi)


def torus_dbar_defect(family, grid_pts=240):
    """FD covariant dbar defect of a family over the fundamental domain."""
    k = family.k
    xs = (np.arange(grid_pts) + 0.5) / grid_pts
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    vals = family(pts)
    h = 1.0 / grid_pts
    dx = (np.roll(vals, -1, axis=0) - np.roll(vals, 1, axis=0)) / (2 * h)
    dy = (np.roll(vals, -1, axis=1) - np.roll(vals, 1, axis=1)) / (2 * h)
    # periodic rolls are wrong across the seam; exclude the outermost cells
    A = family.backend.connection_coefficients(k, pts)
    dbar = 0.5 * ((dx + A[..., 0] * vals) + 1j * (dy + A[..., 1] * vals))
    inner = (slice(1, -1), slice(1, -1))
    return float(np.max(np.abs(dbar[inner]))), h


def ode_geodesic(w0, v, T, nsteps=4000):
    """Independent RK4 on the geodesic equation of the conformal FS metric."""

    def acc(w, wd):
        du = -np.conj(w) / (1 + abs(w) ** 2)  # d/dw of log conformal factor
        return -2.0 * du * wd * wd

    w, wd = complex(w0), complex(v)
    h = T / nsteps
    for _ in range(nsteps):
        k1w, k1v = wd, acc(w, wd)
        k2w, k2v = wd + h / 2 * k1v, acc(w + h / 2 * k1w, wd + h / 2 * k1v)
        k3w, k3v = wd + h / 2 * k2v, acc(w + h / 2 * k2w, wd + h / 2 * k2v)
        k4w, k4v = wd + h * k3v, acc(w + h * k3w, wd + h * k3v)
        w = w + h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
        wd = wd + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return w


# ---------------------------------------------------------------------------
# torus backend


def test_torus_symplectic_area_is_one():
    back = torus_backend(1)
    Om = back.omega(np.zeros((1, 2)))[0]
    assert Om[0, 1] == 1.0  # constant coefficient; area of the unit square is 1


def test_torus_compatibility():
    rng = np.random.default_rng(0)
    for n in (1, 2):
        back = torus_backend(n)
        pts = rng.uniform(0, 1, size=(10, 2 * n))
        assert back.compatibility_defect(pts) < 1e-10


def test_torus_gauge_curvature_matches_prequantization():
    rng = np.random.default_rng(1)
    for n in (1, 2):
        back = torus_backend(n)
        for k in (1, 4, 16):
            p = rng.uniform(0, 1, size=2 * n)
            F = connection_curvature_fd(back, k, p)
            target = -2j * np.pi * k * back.omega(p)
            assert np.max(np.abs(F - target)) < 1e-8


def test_torus_geodesics_are_straight():
    back = torus_backend(1)
    p = np.array([0.2, 0.7])
    v = np.array([1.0, -0.5])
    pos, vel = back.geodesic_with_velocity(p, v, 1.7)
    assert np.allclose(back.wrap(pos), back.wrap(p + 1.7 * v))
    assert np.allclose(vel, v)


def test_torus_rejects_other_lattices_and_dimensions():
    with pytest.raises(ValueError):
        torus_backend(3)
    with pytest.raises(ValueError):
        torus_backend(1, lattice="hexagonal")


# ---------------------------------------------------------------------------
# theta sections


def test_theta_gauge_consistency_under_lattice_translations():
    """|psi| agrees at identified boundary points within 1e-8, up to k = 64."""
    rng = np.random.default_rng(2)
    back = torus_backend(1)
    cases = [(k, j) for k in (1, 2, 3, 4, 8) for j in range(k)]
    cases += [(16, j) for j in (0, 5, 8, 15)] + [(64, j) for j in (0, 17, 32, 63)]
    for k, j in cases:
        fam = theta_section(k, j, back)
        pts = rng.uniform(0, 1, size=(12, 2))
        base = np.abs(fam(pts))
        for shift in ([1, 0], [0, 1], [1, 1], [-1, 0]):
            trans = np.abs(fam(pts + np.asarray(shift, dtype=float)))
            assert np.max(np.abs(trans - base)) < 1e-8


def test_theta_deck_multipliers():
    back = torus_backend(1)
    rng = np.random.default_rng(3)
    for k, j in ((4, 1), (8, 3)):
        fam = theta_section(k, j, back)
        pts = rng.uniform(0, 1, size=(8, 2))
        for axis, shift in ((0, [1.0, 0.0]), (1, [0.0, 1.0])):
            lhs = fam(pts + shift)
            rhs = back.deck_multiplier(k, axis, pts) * fam(pts)
            assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_theta_zero_count_equals_k():
    """Winding-number oracle around the fundamental domain boundary."""
    back = torus_backend(1)
    for k, j in ((4, 0), (8, 3), (16, 7)):
        fam = theta_section(k, j, back)
        t = np.linspace(0.0, 1.0, 6000, endpoint=False)
        x0, y0 = 0.5 / k + 0.013, (0.5 - j / k) % 1.0 + 0.29
        loop = np.concatenate(
            [
                np.stack([x0 + t, np.full_like(t, y0)], axis=-1),
                np.stack([np.full_like(t, x0 + 1), y0 + t], axis=-1),
                np.stack([x0 + 1 - t, np.full_like(t, y0 + 1)], axis=-1),
                np.stack([np.full_like(t, x0), y0 + 1 - t], axis=-1),
            ]
        )
        count = winding_count(fam(loop))
        assert abs(count - k) < 1e-6


def test_theta_dbar_defect_refinement_pair():
    back = torus_backend(1)
    fam = theta_section(8, 3, back)
    d_coarse, h_coarse = torus_dbar_defect(fam, grid_pts=120)
    d_fine, h_fine = torus_dbar_defect(fam, grid_pts=240)
    C = d_coarse / h_coarse**2
    assert d_fine <= 1.5 * C * h_fine**2


def test_theta_l2_normalization_oracle():
    """Quadrature of |psi|^2 over the fundamental domain equals (2k)^{-1/2}."""
    back = torus_backend(1)
    for k, j in ((4, 1), (8, 5)):
        fam = theta_section(k, j, back)
        P = 300
        xs = (np.arange(P) + 0.5) / P
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        vals = fam(np.stack([X, Y], axis=-1))
        quad = np.sum(np.abs(vals) ** 2) / P**2
        assert abs(quad - (2 * k) ** -0.5) < 1e-6


def test_theta_index_out_of_range():
    back = torus_backend(1)
    with pytest.raises(ValueError):
        theta_section(4, 4, back)
    with pytest.raises(ValueError):
        theta_section(4, -1, back)


def test_theta_half_characteristic_vanishes_at_origin():
    for k in (4, 16, 64):
        assert abs(theta_value(np.array(0j), k, k // 2)) < 1e-15


def test_theta_product_section_factorizes():
    back2 = torus_backend(2)
    back1 = torus_backend(1)
    k = 8
    terms = [(1.0, 0, 3), (0.5 - 0.2j, 2, 5)]
    fam = theta_product_section(k, terms, back2)
    f1 = {j: theta_section(k, j, back1) for j in (0, 2, 3, 5)}
    rng = np.random.default_rng(4)
    pts = rng.uniform(0, 1, size=(6, 4))
    got = fam(pts)
    expect = sum(
        c * f1[j1](pts[:, :2]) * f1[j2](pts[:, 2:]) for c, j1, j2 in terms
    )
    assert np.max(np.abs(got - expect)) < 1e-12


# ---------------------------------------------------------------------------
# CP^1 backend


def test_cp1_total_area_quadrature():
    """Radial quadrature of omega matches the closed form rho^2/(1+rho^2) -> 1."""
    back = cp1_backend()
    rho = 40.0
    r = np.linspace(0, rho, 400_000)
    dens = 2.0 * r / (1 + r**2) ** 2  # angular integral of omega / pi done
    area = np.trapezoid(dens, r)
    assert abs(area - rho**2 / (1 + rho**2)) < 1e-6
    assert abs(area - 1.0) < 1e-3  # tail is 1/(1+rho^2)


def test_cp1_compatibility():
    back = cp1_backend()
    rng = np.random.default_rng(5)
    pts = rng.uniform(-2, 2, size=(20, 2))
    assert back.compatibility_defect(pts) < 1e-10


def test_cp1_geodesics_match_ode_oracle():
    back = cp1_backend()
    rng = np.random.default_rng(6)
    for _ in range(4):
        p = rng.uniform(-0.5, 0.5, size=2)
        v = rng.normal(size=2)
        T = 0.3
        pos, vel = back.geodesic_with_velocity(p, v[None, :], T)
        w_oracle = ode_geodesic(complex(*p), complex(*v), T)
        got = complex(pos[0, 0], pos[0, 1])
        assert abs(got - w_oracle) < 1e-8


def test_cp1_geodesic_speed_and_antipodal_distance():
    """Unit-speed geodesic from the chart origin reaches the equator |w| = 1
    at arclength pi*R/2, i.e. the antipode sits at half the circumference."""
    back = cp1_backend()
    v = np.array([1.0, 0.0])
    g = back.metric(np.zeros(2))
    speed = np.sqrt(v @ g @ v)
    vunit = v / speed
    half = np.pi * SPHERE_RADIUS / 2
    pos, _ = back.geodesic_with_velocity(np.zeros(2), vunit[None, :], half)
    assert abs(np.hypot(pos[0, 0], pos[0, 1]) - 1.0) < 1e-9
    # g-speed is constant along the ray
    for t in (0.1, 0.3, 0.6):
        p, vel = back.geodesic_with_velocity(np.zeros(2), vunit[None, :], t)
        gt = back.metric(p[0])
        assert abs(np.sqrt(vel[0] @ gt @ vel[0]) - 1.0) < 1e-9


def test_cp1_gauge_curvature_matches_prequantization():
    back = cp1_backend()
    rng = np.random.default_rng(7)
    for k in (1, 8, 32):
        p = rng.uniform(-1.2, 1.2, size=2)
        F = connection_curvature_fd(back, k, p)
        target = -2j * np.pi * k * back.omega(p)
        assert np.max(np.abs(F - target)) < 1e-7


def test_cp1_section_constant_has_no_zeros():
    back = cp1_backend()
    fam = cp1_section(4, [1.0], back)
    rng = np.random.default_rng(8)
    pts = rng.uniform(-2, 2, size=(50, 2))
    assert np.min(np.abs(fam(pts))) > 0.0


def test_cp1_section_monomial_zero_multiplicity():
    back = cp1_backend()
    for m in (1, 2, 3):
        fam = cp1_section(4, [0.0] * m + [1.0], back)
        t = np.linspace(0, 1, 2000, endpoint=False)
        loop = 0.1 * np.stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)], axis=-1)
        count = winding_count(fam(loop))
        assert abs(count - m) < 1e-6


def test_cp1_section_degree_cap():
    back = cp1_backend()
    with pytest.raises(ValueError):
        cp1_section(2, [1.0, 0.0, 0.0, 1.0], back)


def test_cp1_section_dbar_defect_refinement_pair():
    back = cp1_backend()
    rng = np.random.default_rng(9)
    coeffs = rng.normal(size=5) + 1j * rng.normal(size=5)
    fam = cp1_section(16, coeffs, back)

    def defect(P):
        ax = np.linspace(-0.8, 0.8, P)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        pts = np.stack([X, Y], axis=-1)
        vals = fam(pts)
        h = ax[1] - ax[0]
        dx = (vals[2:, 1:-1] - vals[:-2, 1:-1]) / (2 * h)
        dy = (vals[1:-1, 2:] - vals[1:-1, :-2]) / (2 * h)
        A = back.connection_coefficients(16, pts[1:-1, 1:-1])
        vin = vals[1:-1, 1:-1]
        dbar = 0.5 * ((dx + A[..., 0] * vin) + 1j * (dy + A[..., 1] * vin))
        return float(np.max(np.abs(dbar))), h

    d1, h1 = defect(81)
    d2, h2 = defect(161)
    C = d1 / h1**2
    assert d2 <= 1.5 * C * h2**2


def test_cp1_transition_continuity():
    """|value| is chart-independent: compare against the opposite chart."""
    back = cp1_backend()
    k = 6
    coeffs = np.array([1.0, -0.3, 0.0, 2.0, 0.0, 0.0, 0.5j])
    fam = cp1_section(k, coeffs, back)
    flipped = cp1_section(k, coeffs[::-1].conj() * 0 + coeffs[::-1], back)  # p'(w') = w'^k p(1/w')
    rng = np.random.default_rng(10)
    w = rng.uniform(1.5, 4.0, size=6) * np.exp(2j * np.pi * rng.uniform(size=6))
    pts = np.stack([w.real, w.imag], axis=-1)
    wp = 1.0 / w
    pts_p = np.stack([wp.real, wp.imag], axis=-1)
    lhs = np.abs(fam(pts))
    rhs = np.abs(flipped(pts_p))
    assert np.max(np.abs(lhs - rhs)) < 1e-10
    # and the full values agree through the unitary transition multiplier
    trans = back.transition_multiplier(k, pts)
    assert np.max(np.abs(flipped(pts_p) - trans * fam(pts))) < 1e-10


# ---------------------------------------------------------------------------
# parallel transport


def _square_loop(center, eps, samples_per_side=200, clockwise=True):
    c = np.asarray(center, dtype=float)
    corners = np.array([[0, 0], [0, eps], [eps, eps], [eps, 0], [0, 0]]) if clockwise else np.array(
        [[0, 0], [eps, 0], [eps, eps], [0, eps], [0, 0]]
    )
    corners = corners + c
    pts = []
    for a, b in zip(corners[:-1], corners[1:]):
        t = np.linspace(0, 1, samples_per_side, endpoint=False)[:, None]
        pts.append(a + t * (b - a))
    pts.append(corners[-1:])
    return np.concatenate(pts, axis=0)


def shoelace_signed_area(path):
    x, y = path[:, 0], path[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def test_transport_constant_path():
    back = torus_backend(1)
    path = np.tile(np.array([[0.3, 0.4]]), (10, 1))
    assert parallel_transport(back, 4, path) == 1.0


def test_transport_square_loop_holonomy_torus():
    """Holonomy equals exp(-2*pi*i*k*S) with S the enclosed omega-area signed
    positive for clockwise traversal (the declared gauges' orientation)."""
    back = torus_backend(1)
    for k, eps, center in ((4, 0.05, (0.0, 0.0)), (4, 0.1, (0.4, 0.3)), (16, 0.05, (0.2, 0.6))):
        loop = _square_loop(center, eps, clockwise=True)
        got = parallel_transport(back, k, loop)
        signed_area = -shoelace_signed_area(loop)  # clockwise-positive
        assert abs(signed_area - eps**2) < 1e-12
        expect = np.exp(-2j * np.pi * k * signed_area)
        assert abs(got - expect) <= 5 * eps


def test_transport_holonomy_orientation_flip():
    back = torus_backend(1)
    loop_cw = _square_loop((0.1, 0.2), 0.08, clockwise=True)
    loop_ccw = _square_loop((0.1, 0.2), 0.08, clockwise=False)
    a = parallel_transport(back, 8, loop_cw)
    b = parallel_transport(back, 8, loop_ccw)
    assert abs(a - np.conj(b)) < 1e-10


def test_transport_reversed_path_is_conjugate():
    back = torus_backend(1)
    rng = np.random.default_rng(11)
    pts = np.cumsum(rng.normal(scale=0.02, size=(80, 2)), axis=0) + np.array([0.3, 0.3])
    fwd = parallel_transport(back, 4, pts)
    rev = parallel_transport(back, 4, pts[::-1])
    assert abs(fwd - np.conj(rev)) < 1e-10
    assert abs(abs(fwd) - 1.0) < 1e-12


def test_transport_unitarity_drift_shrinks_at_high_order():
    back = torus_backend(1)

    def drift_at(samples):
        t = np.linspace(0, 1, samples)
        path = np.stack([0.4 * np.cos(2 * np.pi * t), 0.4 * np.sin(2 * np.pi * t)], axis=-1)
        val, drift = parallel_transport(back, 16, path, return_drift=True)
        assert abs(abs(val) - 1.0) < 1e-12  # renormalized output is unit modulus
        return drift

    d400, d800 = drift_at(400), drift_at(800)
    assert d400 < 1e-4
    assert d800 < d400 / 8  # fourth-order integrator: halving steps cuts ~16x


def test_transport_holonomy_cp1():
    back = cp1_backend()
    k, eps = 8, 0.04
    center = (0.3, -0.2)
    loop = _square_loop(center, eps, clockwise=True)
    got = parallel_transport(back, k, loop)
    # omega-area of the square by 2D midpoint quadrature (independent oracle)
    m = 400
    xs = center[0] + (np.arange(m) + 0.5) * eps / m
    ys = center[1] + (np.arange(m) + 0.5) * eps / m
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    dens = 1.0 / (np.pi * (1 + X**2 + Y**2) ** 2)
    area = float(dens.sum() * (eps / m) ** 2)
    expect = np.exp(-2j * np.pi * k * area)
    assert abs(got - expect) <= 5 * eps


def test_transport_path_leaves_atlas():
    back = cp1_backend()
    path = np.array([[0.0, 0.0], [6.0, 0.0]])
    with pytest.raises(AtlasError):
        parallel_transport(back, 2, path)
