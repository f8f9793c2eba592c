import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from wgtorus.exceptions import DomainError, GeometryError, OutOfChartError
from wgtorus.geometry import (
    build_curve,
    chart_coordinates,
    circle_profile,
    eval_chart,
    invert_chart,
    tabulated_profile,
    triangle_profile,
)

TWO_PI = 2 * math.pi


def test_triangle_total_turning():
    prof = triangle_profile(0.4)
    assert prof.total_turning() == pytest.approx(TWO_PI, abs=1e-10)
    prof.validate()


def test_triangle_gamma_by_independent_quadrature():
    prof = triangle_profile(0.4)
    centers = (0.0, TWO_PI / 3, 2 * TWO_PI / 3, TWO_PI)
    f = lambda s: sum(math.exp(-((s - c) ** 2) / 0.16) for c in centers)
    ref, _ = integrate.quad(f, 0, TWO_PI, epsabs=1e-14, limit=200)
    assert prof.gamma == pytest.approx(ref, rel=1e-12)


def test_triangle_threefold_symmetry():
    prof = triangle_profile(0.4)
    k = prof(np.array([0.0, TWO_PI / 3, 2 * TWO_PI / 3]))
    assert np.ptp(k) < 1e-10


def test_triangle_derivative_matches_difference():
    prof = triangle_profile(0.4)
    s = np.linspace(0, TWO_PI, 101)
    d = 1e-5
    fd = (prof(s + d) - prof(s - d)) / (2 * d)
    assert np.max(np.abs(fd - prof.derivative(s))) < 1e-8


def test_circle_profile_closes():
    prof = circle_profile()
    assert prof.total_turning() == pytest.approx(TWO_PI, abs=1e-12)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_profile_validation(bad):
    with pytest.raises(DomainError):
        triangle_profile(bad)
    with pytest.raises(DomainError):
        circle_profile(bad)


def test_circle_curve_is_analytic(circ):
    s = np.linspace(0, TWO_PI, 1000)
    x, z = circ.point(s)
    assert np.max(np.abs(x - (3 + np.sin(s)))) < 1e-8
    assert np.max(np.abs(z - (1 - np.cos(s)))) < 1e-8


def test_triangle_curve_closed(tri):
    assert tri.closure_error < 1e-10
    x, z = tri.point(np.linspace(0, tri.L, 1000))
    assert np.all(np.isfinite(x)) and np.all(np.isfinite(z))
    assert np.all(x > 0)
    assert tri.total_turning == pytest.approx(TWO_PI, abs=1e-10)


def test_unit_speed(tri):
    s = np.random.default_rng(1).uniform(0, tri.L, 1000)
    assert np.max(np.abs(np.hypot(tri.q1p(s), tri.q2p(s)) - 1.0)) < 1e-10


def test_frenet_relation(tri):
    # Q'' = k n, with n the inner normal
    s = np.linspace(0, tri.L, 257)
    nx, nz = tri.inner_normal(s)
    k = tri.kappa(s)
    assert np.max(np.abs(tri.q1pp(s) - k * nx)) < 1e-12
    assert np.max(np.abs(tri.q2pp(s) - k * nz)) < 1e-12


def test_position_derivative_matches_tangent(tri):
    s = np.linspace(0.1, 6.0, 50)
    d = 1e-5
    fd = (tri.q1(s + d) - tri.q1(s - d)) / (2 * d)
    assert np.max(np.abs(fd - tri.q1p(s))) < 1e-8


def test_axis_crossing_rejected():
    with pytest.raises(GeometryError):
        build_curve(circle_profile(), 0.5)
    with pytest.raises(DomainError):
        build_curve(circle_profile(), -1.0)


def test_tabulated_matches_circle():
    s = np.linspace(0, TWO_PI, 65)
    prof = tabulated_profile(s, np.full_like(s, 1.3))
    c = build_curve(prof, 3.0)
    x, z = c.point(np.linspace(0, TWO_PI, 200))
    assert np.max(np.abs(np.hypot(x - 3, z - 1) - 1)) < 1e-8


def test_tabulated_validation():
    with pytest.raises(DomainError):
        tabulated_profile([0, 1, 2, 3], [1, -1, 1, 1])
    with pytest.raises(DomainError):
        tabulated_profile([0, 1], [1, 1])


def test_chart_on_boundary(tri):
    s = np.linspace(0, tri.L, 17)
    c = eval_chart(tri, 0.0, s)
    x, z = tri.point(s)
    assert np.allclose(c.X, x, atol=1e-15) and np.allclose(c.Z, z, atol=1e-15)
    assert np.allclose(c.J, c.X)


def test_chart_circle_lame(circ):
    c = eval_chart(circ, 0.2, 0.0)
    assert float(c.h_s) == pytest.approx(0.8, abs=1e-12)


def test_chart_focal_distance(tri):
    s = np.array([0.5, 2.0, 4.0])
    c = eval_chart(tri, 1.0 / tri.kappa(s), s)
    assert not np.any(c.valid)
    assert np.max(np.abs(c.J)) < 1e-12


def test_inversion_boundary_point(tri):
    x, z = tri.point(1.234)
    r, s = invert_chart(tri, x, z)
    assert abs(r) < 1e-12 and s == pytest.approx(1.234, abs=1e-10)


def test_inversion_circle_normal(circ):
    s0 = 0.7
    x, z = circ.point(s0)
    nx, nz = circ.inner_normal(s0)
    r, s = invert_chart(circ, x + 0.3 * nx, z + 0.3 * nz)
    assert r == pytest.approx(0.3, abs=1e-12) and s == pytest.approx(s0, abs=1e-12)


def test_inversion_beyond_focal_raises(circ):
    with pytest.raises(OutOfChartError):
        invert_chart(circ, 3.0, 1.0)  # the centre of the circle


def test_roundtrip_random_points(tri):
    rng = np.random.default_rng(2)
    s = rng.uniform(0, tri.L, 1000)
    # the chart is one-to-one on the tube r < 1/max k, not up to 1/k(s) everywhere
    r = rng.uniform(0, 0.9, 1000) / tri.max_curvature()
    c = eval_chart(tri, r, s)
    r2, s2, inside = chart_coordinates(tri, c.X, c.Z)
    back = eval_chart(tri, r2, s2)
    assert np.all(inside)
    assert np.max(np.abs(back.X - c.X) + np.abs(back.Z - c.Z)) < 1e-9
    assert np.max(np.abs(r2 - r)) < 1e-9


@given(st.floats(0, TWO_PI, exclude_max=True), st.floats(0, 0.3))
@settings(max_examples=200, deadline=None)
def test_roundtrip_property(s, r):
    curve = _curve()
    c = eval_chart(curve, r, s)
    r2, s2 = invert_chart(curve, float(c.X), float(c.Z))
    assert r2 == pytest.approx(r, abs=1e-9)
    assert (s2 - s + 1) % TWO_PI - 1 == pytest.approx(0.0, abs=1e-9)


_CURVE = []


def _curve():
    if not _CURVE:
        _CURVE.append(build_curve(triangle_profile(0.4), 3.0))
    return _CURVE[0]
