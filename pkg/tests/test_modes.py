import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgtorus.exceptions import CollarTooWideError, DomainError, LocalizationError
from wgtorus.modes import (
    RadialCutoff,
    build_mode2d,
    build_mode3d,
    caustic_curve,
    cutoff_localize,
    longitudinal_mode,
    parabolic_mode,
    transverse_normalization,
    wkb_mode,
)
from wgtorus.modes.longitudinal import airy_branch_psi, extend_beyond_turning, extension_coefficients
from wgtorus.semiclassics import ModeIndices, Regime, ScaleParams, assemble_spectrum, longitudinal_coefficients
from wgtorus.specfun import airy_negative_root

PHASE = np.exp(1j * math.pi / 4)


def _zeros(values):
    v = values[np.abs(values) > 1e-12 * np.max(np.abs(values))]
    return int(np.sum(np.sign(v[1:]) != np.sign(v[:-1])))


# -- extension operator


def test_extension_coefficients_ell3():
    assert np.allclose(extension_coefficients(3), [6, -8, 3], atol=1e-12)


@pytest.mark.parametrize("ell", [1, 2, 3, 4, 5])
def test_extension_moments(ell):
    c = extension_coefficients(ell)
    j = np.arange(1, ell + 1)
    for p in range(ell):
        assert np.sum(c * (-j) ** p) == pytest.approx(1.0, abs=1e-10)


def test_extension_reproduces_polynomials():
    sp = 1.0
    g1 = extend_beyond_turning(lambda s: np.ones_like(s), sp, "+")
    g2 = extend_beyond_turning(lambda s: (s - sp) ** 2, sp, "+")
    s = np.linspace(1.0, 1.3, 7)
    assert np.allclose(g1(s), 1.0, atol=1e-14)
    assert np.allclose(g2(s), (s - sp) ** 2, atol=1e-14)


def test_extension_guards():
    g = extend_beyond_turning(np.sin, 1.0, "+", interval=(0.0, 2.0))
    with pytest.raises(DomainError):
        g(np.array([0.9]))
    with pytest.raises(CollarTooWideError):
        g(np.array([1.5]))
    with pytest.raises(DomainError):
        extend_beyond_turning(np.sin, 1.0, "x")
    with pytest.raises(DomainError):
        extension_coefficients(0)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(0, 0.4))
@settings(max_examples=100, deadline=None)
def test_extension_quadratic_property(coef, x):
    f = lambda s: coef[0] + coef[1] * (s - 2.0) + coef[2] * (s - 2.0) ** 2
    g = extend_beyond_turning(f, 2.0, "-")
    s = np.array([2.0 - x])
    assert g(s)[0] == pytest.approx(f(s)[0], abs=1e-11)


# -- longitudinal modes


def test_airy_mode_normalized(psi):
    assert psi.kind == "airy"
    assert psi.norm() == pytest.approx(1.0, abs=1e-8)


def test_airy_mode_support(psi, spectral):
    a, b = psi.support
    delta = 0.1 * (spectral.s_plus - spectral.s_minus)
    assert a == pytest.approx(spectral.s_minus - 2 * delta)
    assert b == pytest.approx(spectral.s_plus + 2 * delta)
    assert 3.6 < a < 3.76 and 4.23 < b < 4.4
    assert psi(np.array([a - 0.01, b + 0.01, 0.0])).tolist() == [0, 0, 0]


def test_airy_mode_oscillation_count(psi, spectral):
    s = np.linspace(spectral.s_minus, spectral.s_plus, 4001)[1:-1]
    real = (psi(s) / PHASE).real
    assert np.max(np.abs((psi(s) / PHASE).imag)) < 1e-12 * np.max(np.abs(real))
    assert _zeros(real) == spectral.m


def _branch_mismatch(tri, scale, m):
    sp = assemble_spectrum(tri, scale, ModeIndices(scale.n, 2, m))
    delta = 0.1 * (sp.s_plus - sp.s_minus)
    s = np.linspace(sp.s_minus + delta, sp.s_plus - delta, 401)
    plus = airy_branch_psi(tri, scale, sp, "+")(s)
    minus = airy_branch_psi(tri, scale, sp, "-")(s)
    return np.max(np.abs(plus - minus)) / np.max(np.abs(plus))


def test_airy_branches_agree_in_bulk(tri, scale):
    # at fixed m the bulk mismatch is set by the next WKB order, roughly 0.5 / m
    errs = [_branch_mismatch(tri, scale, m) for m in (5, 10, 20, 40)]
    assert all(e < 1.0 / m for e, m in zip(errs, (5, 10, 20, 40)))
    assert np.all(np.diff(errs) < 0)


def test_airy_mode_delta_validation(tri, scale, spectral):
    from wgtorus.modes import assemble_psi

    with pytest.raises(DomainError):
        assemble_psi(tri, scale, spectral, delta=-0.1)


def test_wkb_constant_is_plane_wave(const_coeffs, scale):
    sp = assemble_spectrum(const_coeffs, scale, ModeIndices(scale.n, 2, 5))
    mode = wkb_mode(const_coeffs, scale, sp)
    s = np.linspace(0, 2 * math.pi, 200, endpoint=False)
    exact = np.exp(1j * 5 * s) / math.sqrt(2 * math.pi)
    ratio = mode(s) / exact
    assert np.max(np.abs(ratio - ratio[0])) < 1e-10
    assert abs(abs(ratio[0]) - 1) < 1e-10


def _ripple(U0=0.3, amp=0.02):
    from wgtorus.semiclassics import LongitudinalCoefficients

    U = lambda s: U0 + amp * np.cos(np.asarray(s, dtype=float))
    dU = lambda s: -amp * np.sin(np.asarray(s, dtype=float))
    const = lambda c: (lambda s: np.full_like(np.asarray(s, dtype=float), c))
    return LongitudinalCoefficients(2 * math.pi, U, dU, const(0.5), const(0.0), const(0.0), const(0.0))


def test_wkb_periodic_and_eikonal(scale):
    c = _ripple()
    sp = assemble_spectrum(c, scale, ModeIndices(scale.n, 2, 200))
    assert sp.regime is Regime.NO_TURNING
    mode = wkb_mode(c, scale, sp)
    assert mode.norm() == pytest.approx(1.0, abs=1e-8)
    assert abs(mode(0.0) - mode(c.L)) <= 1e-6
    s = np.linspace(0, c.L, 97)
    eik = scale.epsilon * np.imag(mode.derivative(s) / mode(s))
    assert np.max(np.abs(eik - np.sqrt(np.abs(c.V(s, sp.E2))))) < 5 * scale.h


def test_parabolic_ground_state(tri, scale):
    mode, sp = parabolic_mode(tri, scale, ModeIndices(scale.n, 2, 0))
    assert mode.kind == "parabolic"
    assert mode.norm() == pytest.approx(1.0, abs=1e-8)
    s = np.linspace(*mode.support, 2001)
    assert _zeros(np.abs(mode(s)) * np.sign(np.real(mode(s) * np.conj(mode(s[1000]))))) == 0


def test_parabolic_close_to_bohr_sommerfeld(tri, scale):
    _, sp = parabolic_mode(tri, scale, ModeIndices(scale.n, 2, 0))
    bs = assemble_spectrum(tri, scale, ModeIndices(scale.n, 2, 0))
    assert abs(sp.E2 - bs.E2) < 10 * scale.epsilon * scale.h


# -- two-dimensional field


def test_w_vanishes_on_wall(w, psi):
    s = np.linspace(*psi.support, 50)
    assert np.max(np.abs(w(0.0, s))) < 1e-14


def test_transverse_profile_zero_count(w, spectral):
    rho = np.linspace(1e-3, w.default_rho_max(), 4000)
    prof = np.real(w(rho, 3.9) / PHASE)
    peak = np.max(np.abs(prof))
    inner = prof[: np.flatnonzero(np.abs(prof) > 1e-3 * peak)[-1]]
    assert _zeros(inner) == spectral.k - 1


def test_w_small_on_caustic(w, tri, scale, spectral, psi):
    caustic = caustic_curve(tri, scale, spectral)
    s = np.linspace(spectral.s_minus, spectral.s_plus, 40)
    val = np.abs(w(caustic.rho_c(s), s))
    bound = np.abs(psi(s)) * math.sqrt(scale.h) * 10
    assert np.all(val <= bound + 1e-12)


def test_transverse_normalization_unit(w, psi):
    s = np.linspace(*psi.support, 33)[1:-1]
    A, _ = w.stability(s)
    assert np.max(np.abs(transverse_normalization(A, w.spectral.t_k) - 1)) < 1e-6


def test_w_norm_close_to_one(w):
    assert abs(w.sample().norm() - 1) <= 5 * w.h


def test_cutoff_localization(w_loc, w, psi, tri, scale, spectral):
    assert w_loc.norm_change <= 1e-6
    s = np.linspace(*psi.support, 200)
    # plateau of theta covers the caustic depth
    A = longitudinal_coefficients(tri, scale).A(s, spectral.curly_E2)
    assert np.all(math.sqrt(scale.h) * 6.0 > scale.h * spectral.t_k / A * tri.kappa(s))
    assert np.max(np.abs(w_loc(0.0, s))) < 1e-14


def test_cutoff_validation(w):
    with pytest.raises(DomainError):
        RadialCutoff(w.curve, w.h, 0.0)
    with pytest.raises(LocalizationError):
        RadialCutoff(w.curve, w.h, 10.0)
    with pytest.raises(LocalizationError):
        cutoff_localize(w, 1.0)


def test_constant_stability_has_no_correction(const_coeffs, scale):
    from wgtorus.specfun import airy, airy_ai_prime

    sp = assemble_spectrum(const_coeffs, scale, ModeIndices(scale.n, 2, 3))
    mode = wkb_mode(const_coeffs, scale, sp)
    s = np.linspace(0, 6, 7)
    A = 0.5 ** (1 / 3)
    field = build_mode2d(const_coeffs, scale, sp, mode)
    rho = np.full_like(s, 2.0)
    expected = math.sqrt(A) * airy(-sp.t_k + 2.0 * A)[0] / abs(airy_ai_prime(-sp.t_k)) * mode(s)
    assert np.allclose(field(rho, s), expected, atol=1e-14)


def test_caustic_depth(tri, scale, spectral, psi):
    caustic = caustic_curve(tri, scale, spectral)
    s = np.linspace(*psi.support, 100)
    rc = caustic.r_c(s)
    assert np.all((rc > 0) & (rc < 0.3))
    sp1 = assemble_spectrum(tri, scale, ModeIndices(scale.n, 1, 5))
    c1 = caustic_curve(tri, scale, sp1)
    # same E2 for k = 1 and 2 is not guaranteed, so compare the t_k scaling at equal curlyE2
    ratio = caustic.rho_c(s) / (airy_negative_root(2).t / longitudinal_coefficients(tri, scale).A(s, spectral.curly_E2))
    assert np.allclose(ratio, 1.0, rtol=1e-14)
    assert np.all(c1.r_c(s) < rc)


def test_caustic_constant(const_coeffs, scale):
    sp = assemble_spectrum(const_coeffs, scale, ModeIndices(scale.n, 2, 3))
    rc = caustic_curve(const_coeffs, scale, sp).r_c(np.linspace(0, 6, 20))
    assert np.ptp(rc) == 0.0


# -- three-dimensional mode


@pytest.fixture(scope="module")
def u(tri, w_loc):
    return build_mode3d(tri, w_loc, 1500)


def test_mode3d_needs_localized_field(tri, w):
    with pytest.raises(LocalizationError):
        build_mode3d(tri, w, 1500)


def test_mode3d_index_must_match(tri, w_loc):
    with pytest.raises(DomainError):
        build_mode3d(tri, w_loc, 1501)


def test_mode3d_boundary_trace(u, tri):
    rng = np.random.default_rng(3)
    s = rng.uniform(0, tri.L, 100)
    alpha = rng.uniform(0, 2 * math.pi, 100)
    xi, z = tri.point(s)
    vals = u(xi * np.sin(alpha), xi * np.cos(alpha), z)
    # chart inversion leaves r ~ 1e-13 on the wall, so the trace is zero to rounding
    assert np.max(np.abs(vals)) < 1e-12


def test_mode3d_axisymmetric_modulus(u, tri, spectral):
    s = np.linspace(spectral.s_minus, spectral.s_plus, 7)
    r = np.full_like(s, 0.05)
    base = np.abs(u.chart_values(r, s, 0.0))
    assert np.max(base) > 0
    for al in (0.3, 1.7, 4.0):
        assert np.max(np.abs(np.abs(u.chart_values(r, s, al)) - base)) < 1e-12 * np.max(base)


def test_mode3d_cartesian_matches_chart(u, tri):
    from wgtorus.geometry import eval_chart

    r, s, al = 0.05, 3.95, 0.8
    c = eval_chart(tri, r, s)
    val = u(float(c.X) * math.sin(al), float(c.X) * math.cos(al), float(c.Z))
    assert val == pytest.approx(complex(u.chart_values(r, s, al)), abs=1e-10)


def test_mode3d_norm(u):
    assert abs(u.norm() - 1) <= 5 * u.h
