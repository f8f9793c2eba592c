import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgtorus.billiards import (
    Hamiltonian2D,
    PhaseState2D,
    Ray3D,
    action_of_energy,
    billiard_3d,
    default_dt,
    excursion_maxima,
    flow_2d,
    wall_launch,
)
from wgtorus.exceptions import DomainError, GeometryError, RegimeError
from wgtorus.modes import caustic_curve
from wgtorus.semiclassics import LongitudinalCoefficients, ScaleParams


def _centre(spectral):
    return 0.5 * (spectral.s_minus + spectral.s_plus)


# -- 2-D flow


def test_phase_state_energy(tri, scale, spectral):
    ham = Hamiltonian2D(tri, scale, spectral)
    st_ = ham.state(3.9, 0.05, 2.0, 0.3)
    direct = 0.05**2 + float(ham.c.V(3.9, spectral.curly_E2)) + scale.h * (0.09 + 2.0 * ham.a3(3.9))
    assert st_.energy == pytest.approx(direct, abs=1e-12)
    with pytest.raises(DomainError):
        PhaseState2D(0.0, 0.0, -1.0, 0.0, 0.0)


def test_default_dt(tri, scale, spectral):
    dt = default_dt(tri, scale, spectral)
    assert 0 < dt <= 1e-3


def test_flow_energy_and_reflections(tri, scale, spectral):
    ham = Hamiltonian2D(tri, scale, spectral)
    s0 = ham.state(_centre(spectral), 0.05, 0.0, 1.2e-4)
    traj = flow_2d(tri, scale, spectral, s0, T=10.0, dt=1e-3, stride=10)
    assert traj.reflections >= 100
    assert traj.max_drift <= 1e-7
    assert len(traj) == 1001
    arr = traj.arrays()
    assert arr.shape == (1001, 6) and np.all(arr[:, 3] >= 0)


def test_flow_frozen_transverse_when_h_zero(tri, scale, spectral):
    ham = Hamiltonian2D(tri, scale, spectral, h=0.0)
    s0 = ham.state(_centre(spectral), 0.05, 1.5, 0.2)
    # Verlet keeps H0 to O(dt^2); dt = 2.5e-4 puts that below 1e-10
    traj = flow_2d(tri, scale, spectral, s0, T=2.0, dt=2.5e-4, stride=50, h=0.0)
    arr = traj.arrays()
    assert np.all(arr[:, 3] == 1.5) and np.all(arr[:, 4] == 0.2)
    h0 = np.array([ham.h0(s, p) for s, p in arr[:, 1:3]])
    assert np.max(np.abs(h0 - h0[0])) <= 1e-10
    assert traj.reflections == 0


def test_caustic_launch_turns_back(tri, scale, spectral):
    s0 = _centre(spectral)
    rc = float(caustic_curve(tri, scale, spectral).rho_c(s0))
    ham = Hamiltonian2D(tri, scale, spectral)
    traj = flow_2d(tri, scale, spectral, ham.state(s0, 0.0, rc, 0.0), T=0.5, dt=1e-3, stride=50)
    rho = traj.arrays()[:, 3]
    assert np.all(np.diff(rho) < 0)


def test_wall_launch_zero_energy(tri, scale, spectral):
    st_ = wall_launch(tri, scale, spectral, _centre(spectral))
    assert st_.rho == 0 and abs(st_.energy) < 1e-14 and st_.p_s > 0
    with pytest.raises(RegimeError):
        wall_launch(tri, scale, spectral, 0.0)


def test_flow_validation(tri, scale, spectral):
    st_ = wall_launch(tri, scale, spectral, _centre(spectral))
    with pytest.raises(DomainError):
        flow_2d(tri, scale, spectral, st_, T=0.0)
    with pytest.raises(DomainError):
        flow_2d(tri, scale, spectral, st_, T=1.0, dt=-1e-3)


@pytest.mark.slow
def test_caustic_relation(tri, scale, spectral):
    # one wall-to-wall excursion at the quantized energy takes ~650 time units
    st_ = wall_launch(tri, scale, spectral, _centre(spectral))
    traj = flow_2d(tri, scale, spectral, st_, T=1400.0, dt=1e-2, stride=1, step_tol=1e-6)
    peaks = np.array(excursion_maxima(traj))
    assert len(peaks) >= 1
    rc = caustic_curve(tri, scale, spectral).rho_c(peaks[:, 0])
    assert np.all(np.abs(peaks[:, 1] / rc - 1) <= 0.15)


# -- action


def test_action_worked_example(tri, scale):
    # the quoted E2 is rounded to 5 digits and dI/dE2 ~ 750 eps, so the rounded
    # value lands 3.8e-3 above m + 1/2; the unrounded level is checked below
    a = action_of_energy(tri, scale, 0.31169)
    assert a.I / scale.epsilon == pytest.approx(5.5, abs=5e-3)


def test_action_bohr_sommerfeld_identity(tri, scale, spectral):
    assert action_of_energy(tri, scale, spectral.E2).I == pytest.approx(5.5 * scale.epsilon, abs=1e-10 * scale.epsilon)


def test_action_monotone(tri, scale):
    assert action_of_energy(tri, scale, 0.3118).I > action_of_energy(tri, scale, 0.3117).I


def test_action_harmonic():
    beta, L = 0.05, 10.0
    U = lambda s: beta * (np.asarray(s, dtype=float) - L / 2) ** 2
    dU = lambda s: 2 * beta * (np.asarray(s, dtype=float) - L / 2)
    zero = lambda s: np.zeros_like(np.asarray(s, dtype=float))
    one = lambda s: np.ones_like(np.asarray(s, dtype=float))
    c = LongitudinalCoefficients(L, U, dU, one, zero, zero, zero)
    sc = ScaleParams(1e-3, 10)
    for E2 in (0.01, 0.1, 0.3):
        assert action_of_energy(c, sc, E2).I == pytest.approx(E2 / (2 * math.sqrt(beta)), rel=1e-10)


def test_action_regime_error(tri, scale):
    with pytest.raises(RegimeError):
        action_of_energy(tri, scale, 10.0)


# -- 3-D billiard


def test_normal_incidence_retraces(circ):
    # circle of radius 1 centred at (3, 1) in the meridian plane
    ray = Ray3D(np.array([3.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    path = billiard_3d(circ, ray, 3)
    assert path[0].segment_length == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(path[1].direction, [-1, 0, 0], atol=1e-12)
    assert path[1].segment_length == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(path[2].origin, [2.0, 0.0, 1.0], atol=1e-12)


def test_ray_validation(circ):
    with pytest.raises(DomainError):
        Ray3D(np.zeros(3), np.array([1.0, 1.0, 0.0]))
    ray = Ray3D(np.array([3.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(DomainError):
        billiard_3d(circ, ray, 0)
    with pytest.raises(DomainError):
        billiard_3d(circ, Ray3D(np.array([5.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0])), 1)


def test_outward_ray_from_wall_raises(circ):
    with pytest.raises(GeometryError):
        billiard_3d(circ, Ray3D(np.array([4.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0])), 1)


def test_triangle_invariants_500_bounces(tri):
    rng = np.random.default_rng(0)
    d = rng.standard_normal(3)
    d /= np.linalg.norm(d)
    x, z = tri.point(4.0)
    nx, nz = tri.inner_normal(4.0)
    origin = np.array([0.0, x + 0.2 * nx, z + 0.2 * nz])
    path = billiard_3d(tri, Ray3D(origin, d), 500)
    lz = np.array([r.angular_momentum for r in path])
    speed = np.array([np.linalg.norm(r.direction) for r in path])
    assert np.ptp(lz) <= 1e-10
    assert np.max(np.abs(speed - 1)) <= 1e-14


@given(st.floats(0.1, 0.8), st.floats(0, 2 * math.pi), st.floats(-1, 1), st.floats(0, 2 * math.pi))
@settings(max_examples=25, deadline=None)
def test_billiard_invariants_property(depth, s0, cz, phi):
    curve = _circle()
    x, z = curve.point(s0)
    nx, nz = curve.inner_normal(s0)
    origin = np.array([x + depth * nx, 0.0, z + depth * nz])
    sz = math.sqrt(1 - cz * cz)
    d = np.array([sz * math.cos(phi), sz * math.sin(phi), cz])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        path = billiard_3d(curve, Ray3D(origin, d / np.linalg.norm(d)), 20)
    lz = np.array([r.angular_momentum for r in path])
    assert np.ptp(lz) <= 1e-10
    for r in path:
        xi = math.hypot(*r.end[:2])
        # every hit lies on the torus surface
        assert math.hypot(xi - 3.0, r.end[2] - 1.0) == pytest.approx(1.0, abs=1e-9)


_CIRC = []


def _circle():
    if not _CIRC:
        from wgtorus.geometry import build_curve, circle_profile

        _CIRC.append(build_curve(circle_profile(), 3.0))
    return _CIRC[0]
