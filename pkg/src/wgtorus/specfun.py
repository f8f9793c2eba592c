"""Airy functions, negative Airy zeros and integer-order parabolic cylinder functions.

The Airy routines use the Maclaurin series in extended precision on a
central interval and the classical asymptotic expansions outside it. All
functions accept scalars or array-likes and return the same shape.
"""

from dataclasses import dataclass
import math

import numpy as np

from .exceptions import DomainError, UnsupportedOrderError

__all__ = [
    "AiryValue",
    "AiryRoot",
    "airy",
    "airy_ai",
    "airy_ai_prime",
    "airy_negative_root",
    "parabolic_cylinder_d",
    "SERIES_RADIUS",
]

# |x| below which the Maclaurin series is used. The negative-axis asymptotic
# series only reaches ~1e-9 at |x| = 6; at 8 both branches agree to ~1e-13.
SERIES_RADIUS = 8.0

# Ai(0) = 3^(-2/3) / Gamma(2/3) and -Ai'(0) = 3^(-1/3) / Gamma(1/3), parsed in
# extended precision: the series cancels by ~1e7 near x = 8.
_AI0 = np.longdouble("0.355028053887817239260063186004")
_AIP0 = np.longdouble("0.258819403792806798405183560189")
_SQRT_PI = math.sqrt(math.pi)
_N_SERIES = 40
_N_ASYMP = 40


def _asymptotic_coefficients(n):
    u = np.empty(n)
    u[0] = 1.0
    for k in range(1, n):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
    v = np.empty(n)
    v[0] = 1.0
    v[1:] = -(6 * np.arange(1, n) + 1) / (6 * np.arange(1, n) - 1) * u[1:]
    return u, v


_U, _V = _asymptotic_coefficients(_N_ASYMP)


@dataclass(frozen=True)
class AiryValue:
    ai: float
    ai_prime: float


@dataclass(frozen=True)
class AiryRoot:
    """The k-th zero of Ai, stored as the positive number t_k with Ai(-t_k) = 0."""

    k: int
    t: float


def _check_finite(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("Airy functions need finite arguments")
    return x


def _series(x):
    # Ai = c1 f - c2 g with f, g the two Maclaurin solutions of y'' = x y.
    z = x.astype(np.longdouble)
    z3 = z * z * z
    f = np.ones_like(z)
    g = z.copy()
    fp = z * z / 2
    gp = np.ones_like(z)
    tf, tg, tfp, tgp = f.copy(), g.copy(), fp.copy(), gp.copy()
    for k in range(_N_SERIES):
        tf = tf * z3 / ((3 * k + 2) * (3 * k + 3))
        tg = tg * z3 / ((3 * k + 3) * (3 * k + 4))
        tfp = tfp * z3 / (3 * (k + 1) * (3 * k + 5))
        tgp = tgp * z3 / ((3 * k + 1) * (3 * k + 3))
        f += tf
        g += tg
        fp += tfp
        gp += tgp
    return (_AI0 * f - _AIP0 * g).astype(float), (_AI0 * fp - _AIP0 * gp).astype(float)


def _sum_truncated(coef, zeta_inv, start, step):
    """Optimally truncated sum of (-1)^j coef[start + step*j] zeta^-(start + step*j)."""
    total = np.zeros_like(zeta_inv)
    prev = np.full_like(zeta_inv, np.inf)
    active = np.ones(zeta_inv.shape, dtype=bool)
    sign = 1.0
    for idx in range(start, _N_ASYMP, step):
        term = coef[idx] * zeta_inv**idx
        active &= np.abs(term) < np.abs(prev)
        total = np.where(active, total + sign * term, total)
        prev = term
        sign = -sign
    return total


def _asymptotic_positive(x):
    zeta = 2.0 / 3.0 * x**1.5
    zi = 1.0 / zeta
    pref = np.exp(-zeta) / (2 * _SQRT_PI)
    su = _sum_truncated(_U, zi, 0, 1)
    sv = _sum_truncated(_V, zi, 0, 1)
    return pref * su / x**0.25, -pref * x**0.25 * sv


def _asymptotic_negative(x):
    z = -x
    zeta = 2.0 / 3.0 * z**1.5
    zi = 1.0 / zeta
    phase = zeta - math.pi / 4
    c, s = np.cos(phase), np.sin(phase)
    u_even = _sum_truncated(_U, zi, 0, 2)
    u_odd = _sum_truncated(_U, zi, 1, 2)
    v_even = _sum_truncated(_V, zi, 0, 2)
    v_odd = _sum_truncated(_V, zi, 1, 2)
    ai = (c * u_even + s * u_odd) / (_SQRT_PI * z**0.25)
    aip = z**0.25 * (s * v_even - c * v_odd) / _SQRT_PI
    return ai, aip


def airy(x):
    """Return ``(Ai(x), Ai'(x))`` for real ``x`` (scalar or array).

    Raises
    ------
    DomainError
        If any argument is not finite.
    """
    xa = _check_finite(x)
    flat = np.atleast_1d(xa).ravel()
    ai = np.empty_like(flat)
    aip = np.empty_like(flat)
    mid = np.abs(flat) <= SERIES_RADIUS
    pos = flat > SERIES_RADIUS
    neg = flat < -SERIES_RADIUS
    if mid.any():
        ai[mid], aip[mid] = _series(flat[mid])
    if pos.any():
        ai[pos], aip[pos] = _asymptotic_positive(flat[pos])
    if neg.any():
        ai[neg], aip[neg] = _asymptotic_negative(flat[neg])
    if xa.ndim == 0:
        return float(ai[0]), float(aip[0])
    return ai.reshape(xa.shape), aip.reshape(xa.shape)


def airy_ai(x):
    """Airy function Ai(x), absolute error below 1e-12 for |x| <= 20."""
    return airy(x)[0]


def airy_ai_prime(x):
    """Derivative Ai'(x) of the Airy function."""
    return airy(x)[1]


def airy_value(x):
    ai, aip = airy(float(x))
    return AiryValue(ai, aip)


def _root_guess(k):
    return (3 * math.pi * (4 * k - 1) / 8) ** (2.0 / 3.0)


def airy_negative_root(k):
    """k-th zero of Ai on the negative axis, returned as :class:`AiryRoot`.

    Starts from ``(3 pi (4k - 1) / 8)^(2/3)`` and runs Newton's method on
    ``t -> Ai(-t)``, falling back to bisection inside the bracket that
    separates neighbouring zeros.
    """
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise DomainError(f"Airy root index must be a positive integer, got {k!r}")
    k = int(k)
    t = _root_guess(k)
    # Zeros of Ai interlace with the guesses well enough for this bracket.
    lo = t - 0.5 if k == 1 else 0.5 * (_root_guess(k - 1) + t)
    hi = 0.5 * (t + _root_guess(k + 1))
    f_lo = airy_ai(-lo)
    for _ in range(100):
        ai, aip = airy(-t)
        if ai == 0.0:
            break
        if np.sign(ai) == np.sign(f_lo):
            lo, f_lo = t, ai
        else:
            hi = t
        step = ai / aip
        t_new = t + step
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 1e-15 * t:
            t = t_new
            break
        t = t_new
    return AiryRoot(k, float(t))


def _hermite(m, y):
    h_prev = np.ones_like(y)
    if m == 0:
        return h_prev
    h = 2 * y
    for j in range(1, m):
        h_prev, h = h, 2 * y * h - 2 * j * h_prev
    return h


def parabolic_cylinder_d(m, eta):
    """Parabolic cylinder function D_m(eta) for integer ``m >= 0``.

    Uses ``D_m(eta) = 2^(-m/2) exp(-eta^2/4) H_m(eta/sqrt 2)`` with the
    physicists' Hermite polynomial from its three-term recurrence.
    """
    if isinstance(m, bool) or int(m) != m or m < 0:
        raise UnsupportedOrderError(f"only non-negative integer orders are supported, got {m!r}")
    m = int(m)
    eta = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(eta)):
        raise DomainError("parabolic_cylinder_d needs finite arguments")
    val = 2.0 ** (-m / 2) * np.exp(-(eta**2) / 4) * _hermite(m, eta / math.sqrt(2))
    return float(val) if val.ndim == 0 else val
