"""Model bundle calculus: connection identities, derivatives, holomorphy."""

import numpy as np
import pytest

from bargmann_lens.geometry import BallDomain, ConnectionField, GridSection
from bargmann_lens.model import (
    bargmann_section,
    covariant_derivative,
    curvature_of,
    dbar_defect,
    dbar_field,
    dbar_operator,
    model_connection,
    model_connection_field,
    radial_flatness_defect,
    reweighted_ordinary_dbar_defect,
    unweight,
)


def gaussian_section(domain):
    return bargmann_section({(0,) * domain.n: 1.0}, domain)


# ---------------------------------------------------------------------------
# model connection


def test_model_connection_vanishes_at_origin():
    rng = np.random.default_rng(0)
    for n in (1, 2):
        v = rng.normal(size=2 * n)
        assert model_connection(np.zeros(2 * n), v) == 0


def test_model_connection_formula_value():
    # n=1, z = x=1, v = d/dy: -i*pi*(x*v_y - y*v_x) = -i*pi
    val = model_connection(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert val == -1j * np.pi


def test_model_connection_radial_vector_exactly_zero():
    rng = np.random.default_rng(1)
    for n in (1, 2):
        for _ in range(20):
            z = rng.uniform(-1, 1, size=2 * n)
            assert model_connection(z, z) == 0.0  # x*y - y*x cancels exactly


def test_model_connection_linear_and_imaginary():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = rng.integers(1, 4)
        z = rng.uniform(-1, 1, size=2 * n)
        v, w = rng.normal(size=(2, 2 * n))
        a, b = rng.normal(size=2)
        lhs = model_connection(z, a * v + b * w)
        rhs = a * model_connection(z, v) + b * model_connection(z, w)
        assert abs(lhs - rhs) < 1e-12
        assert model_connection(z, v).real == 0.0


def test_model_connection_dimension_mismatch():
    with pytest.raises(ValueError):
        model_connection(np.zeros(2), np.zeros(4))


# ---------------------------------------------------------------------------
# covariant derivative


def test_covariant_derivative_constant_section_at_origin():
    dom = BallDomain(1, points_per_axis=33)
    ones = GridSection.from_evaluator(
        dom,
        lambda p: np.ones(np.asarray(p).shape[:-1], dtype=complex),
        partials=lambda p, i: np.zeros(np.asarray(p).shape[:-1], dtype=complex),
    )
    for v in (np.array([1.0, 0.0]), np.array([0.3, -2.0])):
        assert covariant_derivative(ones, np.zeros(2), v, mode="analytic") == 0
        assert covariant_derivative(ones, np.zeros(2), v, mode="fd") == 0


def test_covariant_derivative_gaussian_fd_matches_fine_oracle():
    """FD-mode derivative vs an independent centered-difference oracle at h/4."""
    dom = BallDomain(1, points_per_axis=129)
    s = gaussian_section(dom)
    z = np.array([0.5, 0.0])
    v = np.array([1.0, 0.0])
    got = covariant_derivative(s, z, v, mode="fd")

    def raw(p):
        return np.exp(-0.5 * np.pi * np.sum(np.asarray(p) ** 2, axis=-1))

    hq = dom.h / 4
    oracle = (raw(z + [hq, 0]) - raw(z - [hq, 0])) / (2 * hq)
    # centered differences are O(h^2); |f'''| <~ 8 on the ball gives C = 2
    assert abs(got - oracle) <= 2.0 * dom.h**2
    exact = -np.pi * 0.5 * np.exp(-0.5 * np.pi * 0.25)
    assert abs(got - exact) <= 2.0 * dom.h**2


def test_covariant_derivative_zero_section():
    dom = BallDomain(1, points_per_axis=33)
    zero = GridSection.from_evaluator(
        dom,
        lambda p: np.zeros(np.asarray(p).shape[:-1], dtype=complex),
        partials=lambda p, i: np.zeros(np.asarray(p).shape[:-1], dtype=complex),
    )
    rng = np.random.default_rng(3)
    for _ in range(5):
        z = rng.uniform(-0.5, 0.5, size=2)
        v = rng.normal(size=2)
        assert covariant_derivative(zero, z, v, mode="analytic") == 0


def test_covariant_derivative_complex_linear_in_section():
    dom = BallDomain(2, points_per_axis=17)
    p1 = {(1, 0): 1.0, (0, 2): 0.5}
    p2 = {(0, 0): 2.0, (1, 1): -1.0}
    a, b = 1.3 - 0.2j, 0.7j
    combo = {key: a * c for key, c in p1.items()}
    for key, c in p2.items():
        combo[key] = combo.get(key, 0) + b * c
    s1 = bargmann_section(p1, dom)
    s2 = bargmann_section(p2, dom)
    s12 = bargmann_section(combo, dom)
    rng = np.random.default_rng(4)
    for _ in range(10):
        z = rng.uniform(-0.4, 0.4, size=4)
        v = rng.normal(size=4)
        lhs = covariant_derivative(s12, z, v, mode="analytic")
        rhs = a * covariant_derivative(s1, z, v, mode="analytic") + b * covariant_derivative(
            s2, z, v, mode="analytic"
        )
        assert abs(lhs - rhs) < 1e-12


def test_covariant_derivative_real_linear_in_vector():
    dom = BallDomain(1, points_per_axis=33)
    s = bargmann_section({(2,): 1.0, (0,): 0.3j}, dom)
    rng = np.random.default_rng(5)
    for _ in range(10):
        z = rng.uniform(-0.5, 0.5, size=2)
        v, w = rng.normal(size=(2, 2))
        a, b = rng.normal(size=2)
        lhs = covariant_derivative(s, z, a * v + b * w, mode="analytic")
        rhs = a * covariant_derivative(s, z, v, mode="analytic") + b * covariant_derivative(
            s, z, w, mode="analytic"
        )
        assert abs(lhs - rhs) < 1e-12


def test_covariant_derivative_fd_needs_interior_point():
    dom = BallDomain(1, points_per_axis=65)
    s = gaussian_section(dom)
    with pytest.raises(ValueError):
        covariant_derivative(s, np.array([1.0, 0.0]), np.array([1.0, 0.0]), mode="fd")


# ---------------------------------------------------------------------------
# dbar operator


def test_dbar_gaussian_is_holomorphic():
    for n in (1, 2):
        dom = BallDomain(n, points_per_axis=33 if n == 1 else 17)
        s = gaussian_section(dom)
        assert dbar_defect(s, mode="analytic") < 1e-12
        rng = np.random.default_rng(6)
        z = rng.uniform(-0.3, 0.3, size=2 * n)
        assert np.max(np.abs(dbar_operator(s, z, mode="analytic"))) < 1e-14


def test_dbar_antiholomorphic_factor_at_origin():
    """sigma = conj(z_1) * gaussian has dbar component 1 at the origin."""
    dom = BallDomain(1, points_per_axis=65)

    def evaluator(p):
        p = np.asarray(p, dtype=float)
        zbar = p[..., 0] - 1j * p[..., 1]
        return zbar * np.exp(-0.5 * np.pi * np.sum(p**2, axis=-1))

    def partials(p, axis):
        p = np.asarray(p, dtype=float)
        zbar = p[..., 0] - 1j * p[..., 1]
        g = np.exp(-0.5 * np.pi * np.sum(p**2, axis=-1))
        dz = 1.0 if axis == 0 else -1j
        return (dz - np.pi * p[..., axis] * zbar) * g

    s = GridSection.from_evaluator(dom, evaluator, partials=partials)
    val = dbar_operator(s, np.zeros(2), mode="analytic")
    # independent quarter-step finite-difference oracle of the same quantity
    hq = dom.h / 4
    dx = (evaluator([hq, 0]) - evaluator([-hq, 0])) / (2 * hq)
    dy = (evaluator([0, hq]) - evaluator([0, -hq])) / (2 * hq)
    oracle = 0.5 * (dx + 1j * dy)
    assert abs(val[0] - oracle) <= 2.0 * hq**2  # oracle itself is O(hq^2)
    assert abs(val[0] - 1.0) < 1e-12
    assert abs(val[0]) > 0.5  # genuinely non-holomorphic


def test_dbar_zero_section():
    dom = BallDomain(2, points_per_axis=9)
    zero = bargmann_section({}, dom)
    assert "empty_polynomial" in zero.flags
    assert dbar_defect(zero, mode="analytic") == 0.0


# ---------------------------------------------------------------------------
# unweighting and the ordinary-holomorphy criterion


def test_unweight_gaussian_gives_constant_one():
    dom = BallDomain(1, points_per_axis=33)
    u = unweight(gaussian_section(dom))
    assert np.max(np.abs(u.values - 1.0)) < 1e-12


def test_unweight_zero_section():
    dom = BallDomain(1, points_per_axis=33)
    u = unweight(bargmann_section({}, dom))
    assert np.max(np.abs(u.values)) == 0.0


def test_unweight_monomial_is_coordinate():
    dom = BallDomain(1, points_per_axis=65)
    u = unweight(bargmann_section({(1,): 1.0}, dom))
    z = dom.complex_points[..., 0]
    assert np.max(np.abs(u.values - z)) < 1e-12
    # the unweighted section is ordinary-holomorphic
    field, valid = dbar_field(u, mode="analytic", connection=None)
    assert np.max(np.abs(field[valid])) < 1e-12


def _random_poly(rng, n, max_degree=5):
    table = {}
    for _ in range(rng.integers(2, 6)):
        key = tuple(int(e) for e in rng.integers(0, max_degree + 1, size=n))
        if sum(key) > max_degree:
            continue
        table[key] = complex(rng.normal(), rng.normal())
    table.setdefault((0,) * n, 1.0)
    return table


def test_holomorphy_criterion_equivalence_on_random_polys():
    """Covariant dbar defect == reweighted ordinary dbar defect of the
    unweighted section, to 1e-8, over >= 20 random degree-<=5 tables."""
    rng = np.random.default_rng(7)
    for trial in range(20):
        n = 1 if trial % 2 == 0 else 2
        dom = BallDomain(n, points_per_axis=33 if n == 1 else 11)
        s = bargmann_section(_random_poly(rng, n), dom)
        lhs = dbar_defect(s, mode="analytic")
        rhs = reweighted_ordinary_dbar_defect(s, mode="analytic")
        assert abs(lhs - rhs) < 1e-8


# ---------------------------------------------------------------------------
# bargmann sections


def test_bargmann_constant_is_gaussian():
    dom = BallDomain(1, points_per_axis=33)
    s = gaussian_section(dom)
    expect = np.exp(-0.5 * np.pi * dom.radius_sq_field)
    assert np.max(np.abs(s.values - expect)) < 1e-14


def test_bargmann_zero_of_coordinate_section():
    dom = BallDomain(1, points_per_axis=33)
    s = bargmann_section({(1,): 1.0}, dom)
    assert s.evaluator(np.zeros(2)) == 0


def test_bargmann_direct_evaluation_value():
    dom = BallDomain(1, points_per_axis=33)
    s = bargmann_section({(2,): 1.0, (0,): 2.0}, dom)
    got = complex(s.evaluator(np.array([1.0, 0.0])))
    assert abs(got - 3.0 * np.exp(-np.pi / 2)) < 1e-14


def test_bargmann_fd_defect_second_order():
    """FD dbar defect of the gaussian shrinks at observed order ~2 under
    h-halving (refinement pair), and the analytic defect is ~0."""
    coarse = BallDomain(1, points_per_axis=65)
    fine = BallDomain(1, points_per_axis=129)
    d_h = dbar_defect(gaussian_section(coarse), mode="fd")
    d_h2 = dbar_defect(gaussian_section(fine), mode="fd")
    order = np.log2(d_h / d_h2)
    assert 1.8 <= order <= 2.2
    assert dbar_defect(gaussian_section(fine), mode="analytic") < 1e-10


# ---------------------------------------------------------------------------
# curvature and radial flatness


def test_model_curvature_constant():
    rng = np.random.default_rng(8)
    for n in (1, 2):
        dom = BallDomain(n, points_per_axis=33 if n == 1 else 9)
        A = model_connection_field(dom)
        for _ in range(5):
            z = rng.uniform(-0.4, 0.4, size=2 * n)
            F = curvature_of(A, z, mode="analytic")
            for a in range(n):
                assert abs(F[2 * a, 2 * a + 1] - (-2j * np.pi)) < 1e-12
            if n == 2:
                assert abs(F[0, 2]) < 1e-12  # no (x_1, x_2) term
            F_fd = curvature_of(A, z * 0.5, mode="fd")
            assert np.max(np.abs(F_fd - F)) < 1e-12  # exact: coefficients linear


def test_zero_connection_curvature():
    dom = BallDomain(1, points_per_axis=33)
    A = ConnectionField(dom, coefficients=lambda p: np.zeros(np.asarray(p).shape, dtype=complex))
    F = curvature_of(A, np.array([0.1, 0.2]), mode="fd")
    assert np.max(np.abs(F)) == 0.0


def test_curvature_fd_observed_order_on_curved_connection():
    """Sinusoidal coefficients give a genuinely O(h^2) FD curvature error."""

    def coeffs(p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape, dtype=complex)
        out[..., 1] = -1j * np.sin(np.pi * p[..., 0])
        return out

    z = np.array([0.23, 0.11])
    exact = -1j * np.pi * np.cos(np.pi * z[0])
    errs = []
    for ppa in (65, 129):
        dom = BallDomain(1, points_per_axis=ppa)
        A = ConnectionField(dom, coefficients=coeffs)
        F = curvature_of(A, z, mode="fd")
        errs.append(abs(F[0, 1] - exact))
    order = np.log2(errs[0] / errs[1])
    assert 1.8 <= order <= 2.2


def test_radial_flatness_defect_model_is_zero():
    for n in (1, 2):
        dom = BallDomain(n, points_per_axis=33 if n == 1 else 9)
        assert radial_flatness_defect(model_connection_field(dom)) <= 1e-12


def test_radial_flatness_defect_non_flat_example():
    # A = -i*pi*x_1 dx_1 on n=1: sup over the ball of pi*x^2 is pi
    dom = BallDomain(1, points_per_axis=65)

    def coeffs(p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape, dtype=complex)
        out[..., 0] = -1j * np.pi * p[..., 0]
        return out

    A = ConnectionField(dom, coefficients=coeffs)
    assert abs(radial_flatness_defect(A) - np.pi) < 1e-12


def test_radial_flatness_defect_zero_connection():
    dom = BallDomain(1, points_per_axis=33)
    A = ConnectionField(dom, coefficients=lambda p: np.zeros(np.asarray(p).shape, dtype=complex))
    assert radial_flatness_defect(A) == 0.0
