import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from wgtorus.exceptions import DomainError, UnsupportedOrderError
from wgtorus.specfun import airy, airy_ai, airy_ai_prime, airy_negative_root, airy_value, parabolic_cylinder_d

mpmath.mp.dps = 30


def test_airy_at_zero():
    assert airy_ai(0.0) == pytest.approx(0.355028053887817, abs=1e-15)
    assert airy_ai_prime(0.0) == pytest.approx(-0.258819403792807, abs=1e-15)


def test_airy_decay():
    assert 0 < airy_ai(20.0) < 1e-15
    assert abs(airy_ai_prime(20.0)) < 1e-14


@pytest.mark.parametrize("x", [-19.5, -12.0, -8.01, -7.99, -4.0879, -1.0, 0.5, 3.0, 7.99, 8.01, 15.0])
def test_airy_matches_mpmath(x):
    ai, aip = airy(x)
    assert ai == pytest.approx(float(mpmath.airyai(x)), abs=2e-13)
    assert aip == pytest.approx(float(mpmath.airyai(x, derivative=1)), abs=5e-13)


def test_airy_matches_scipy_on_grid():
    x = np.linspace(-20, 20, 2001)
    ai, aip = airy(x)
    ref = special.airy(x)
    assert np.max(np.abs(ai - ref[0])) < 1e-12
    assert np.max(np.abs(aip - ref[1])) < 1e-12


def test_airy_ode_residual():
    # Ai'' = x Ai; the derivative of Ai' is taken by a high-order difference
    x = np.linspace(-10, 10, 4001)
    dx = 1e-3
    _, p_plus = airy(x + dx)
    _, p_minus = airy(x - dx)
    _, p_plus2 = airy(x + 2 * dx)
    _, p_minus2 = airy(x - 2 * dx)
    d = (8 * (p_plus - p_minus) - (p_plus2 - p_minus2)) / (12 * dx)
    ai, _ = airy(x)
    assert np.max(np.abs(d - x * ai)) < 1e-9


def test_airy_positive_and_decreasing():
    x = np.linspace(0, 20, 4001)
    ai, aip = airy(x)
    assert np.all(ai > 0)
    assert np.all(np.diff(ai) < 0)
    assert np.all(aip < 0)


def test_airy_branches_agree_at_switch():
    from wgtorus.specfun import SERIES_RADIUS, _asymptotic_negative, _asymptotic_positive, _series

    for x, asym in ((-SERIES_RADIUS, _asymptotic_negative), (SERIES_RADIUS, _asymptotic_positive)):
        xs = np.array([x])
        a_ser, p_ser = (np.asarray(v, dtype=float) for v in _series(xs))
        a_asy, p_asy = (np.asarray(v, dtype=float) for v in asym(xs))
        assert abs(a_ser - a_asy).max() < 1e-12
        assert abs(p_ser - p_asy).max() < 1e-12


def test_airy_root_refinement_idempotent():
    from wgtorus.specfun import airy_ai_prime

    for k in (1, 2, 5):
        t = airy_negative_root(k).t
        assert abs(airy_ai(-t) / airy_ai_prime(-t)) <= 1e-14
        assert abs(airy_ai(-t)) <= 1e-12


def test_airy_value_record():
    v = airy_value(-1.0)
    assert (v.ai, v.ai_prime) == airy(-1.0)


def test_airy_rejects_nonfinite():
    with pytest.raises(DomainError):
        airy(float("nan"))


def test_airy_roots():
    t1 = airy_negative_root(1)
    t2 = airy_negative_root(2)
    assert t1.t == pytest.approx(2.338107410459767, abs=1e-6)
    assert t2.t == pytest.approx(4.0879, abs=5e-4)
    assert t1.t < t2.t
    assert abs(airy_ai(-t2.t)) <= 5e-4
    assert abs(airy_ai_prime(-t1.t)) == pytest.approx(0.70121, abs=1e-5)


@pytest.mark.parametrize("k", range(1, 11))
def test_airy_roots_match_mpmath(k):
    # scipy.special.ai_zeros is only good to ~1e-11 for some k; mpmath is the reference
    assert airy_negative_root(k).t == pytest.approx(-float(mpmath.airyaizero(k)), abs=1e-13)


@pytest.mark.parametrize("k", [0, -1, 1.5, True])
def test_airy_root_index_validation(k):
    with pytest.raises(DomainError):
        airy_negative_root(k)


def test_parabolic_cylinder_examples():
    assert parabolic_cylinder_d(0, 1.2) == pytest.approx(math.exp(-0.36), rel=1e-15)
    assert parabolic_cylinder_d(1, 0.0) == 0.0
    assert parabolic_cylinder_d(5, 2.0) == pytest.approx(float(mpmath.pcfd(5, 2)), rel=1e-13)


@pytest.mark.parametrize("m", range(11))
def test_parabolic_cylinder_matches_scipy(m):
    eta = np.linspace(-6, 6, 121)
    ref = np.array([special.pbdv(m, e)[0] for e in eta])
    assert np.allclose(parabolic_cylinder_d(m, eta), ref, rtol=1e-11, atol=1e-13)


@pytest.mark.parametrize("m", range(11))
def test_parabolic_cylinder_ode_residual(m):
    # D_m'' + (m + 1/2 - eta^2 / 4) D_m = 0
    eta = np.linspace(-5, 5, 1001)
    dx = 1e-3
    f = lambda e: parabolic_cylinder_d(m, e)
    d2 = (-f(eta + 2 * dx) + 16 * f(eta + dx) - 30 * f(eta) + 16 * f(eta - dx) - f(eta - 2 * dx)) / (12 * dx**2)
    scale = max(1.0, float(np.max(np.abs(f(eta)))))
    assert np.max(np.abs(d2 + (m + 0.5 - eta**2 / 4) * f(eta))) / scale < 1e-8


@pytest.mark.parametrize("m", [-1, 1.5])
def test_parabolic_cylinder_order_validation(m):
    with pytest.raises(UnsupportedOrderError):
        parabolic_cylinder_d(m, 1.0)


@given(st.floats(-20, 5))
@settings(max_examples=200, deadline=None)
def test_airy_wronskian_property(x):
    # Wronskian Ai Bi' - Ai' Bi = 1/pi. Beyond x ~ 5 the growth of Bi amplifies the
    # absolute error of Ai, so the identity stops being a meaningful check there.
    ai, aip = airy(x)
    _, _, bi, bip = special.airy(x)
    assert ai * bip - aip * bi == pytest.approx(1 / math.pi, rel=1e-10)


@given(st.integers(0, 10), st.floats(-5, 5))
@settings(max_examples=100, deadline=None)
def test_parabolic_cylinder_parity(m, eta):
    assert parabolic_cylinder_d(m, -eta) == pytest.approx((-1) ** m * parabolic_cylinder_d(m, eta), abs=1e-14)
