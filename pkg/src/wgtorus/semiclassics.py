"""Longitudinal semiclassical problem: potential, stability function,
turning points, quantization rules and the first spectral correction.

With ``X0(s) = R + Q1(s)`` and ``U(s) = a_n^2 / X0^2`` the longitudinal
potential is ``V = U - E2`` and the stability function is

    A(s; E2)^3 = 2 a_n^2 Q2'(s) / X0^3 - 2 k(s) V = B(s) + 2 k(s) E2.
"""

from dataclasses import asdict, dataclass
from enum import Enum
from functools import lru_cache
import math
from typing import Callable, Optional
import warnings

import numpy as np
from scipy import optimize

from .exceptions import DomainError, NoModeError, RegimeError, StabilityError
from .geometry import MeridianCurve
from .specfun import airy_negative_root

__all__ = [
    "ModeIndices",
    "ScaleParams",
    "Regime",
    "SpectralData",
    "LongitudinalCoefficients",
    "longitudinal_coefficients",
    "potential_v",
    "stability_a",
    "turning_points",
    "allowed_action",
    "periodic_action",
    "solve_periodic_quantization",
    "solve_bohr_sommerfeld",
    "correction_e1",
    "assemble_spectrum",
    "spectral_gap",
]

SCAN_NODES = 4096
GAUSS_NODES = 200
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GAUSS_NODES)
# Gauss-Legendre on theta in [0, pi]
_THETA = 0.5 * math.pi * (_GL_X + 1.0)
_THETA_W = 0.5 * math.pi * _GL_W


@dataclass(frozen=True)
class ModeIndices:
    """Quantum numbers: angular ``n``, transverse (Airy) ``k``, longitudinal ``m``."""

    n: int
    k: int
    m: int

    def __post_init__(self):
        for name, lo in (("n", 1), ("k", 1), ("m", 0)):
            val = getattr(self, name)
            if isinstance(val, bool) or int(val) != val or val < lo:
                raise DomainError(f"mode index {name} must be an integer >= {lo}, got {val!r}")


@dataclass(frozen=True)
class ScaleParams:
    """Semiclassical scale: ``epsilon``, ``h = epsilon^(2/3)`` and ``a_n = n epsilon``."""

    epsilon: float
    n: int

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise DomainError("epsilon must be positive and finite")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")

    @classmethod
    def from_h(cls, h, n):
        if not h > 0:
            raise DomainError("h must be positive")
        return cls(h**1.5, n)

    @property
    def h(self):
        return self.epsilon ** (2.0 / 3.0)

    @property
    def a_n(self):
        return self.n * self.epsilon

    def check_ratio(self, R, bounds=(0.05, 20.0)):
        """Warn when ``a_n / R`` leaves the O(1) window; returns the ratio."""
        ratio = self.a_n / R
        if not bounds[0] <= ratio <= bounds[1]:
            warnings.warn(f"a_n/R = {ratio:.4g} outside {bounds}", RuntimeWarning, stacklevel=2)
        return ratio


class Regime(str, Enum):
    NO_TURNING = "NoTurningPoints"
    TWO_TURNING = "TwoTurningPoints"


@dataclass(frozen=True)
class SpectralData:
    E2: float
    E1: float
    t_k: float
    curly_E2: float
    lambda2: float
    regime: Regime
    s_minus: Optional[float]
    s_plus: Optional[float]
    epsilon: float
    n: int
    k: int
    m: int

    @property
    def h(self):
        return self.epsilon ** (2.0 / 3.0)

    @property
    def correction(self):
        """The first-order term ``h t_k E1``."""
        return self.h * self.t_k * self.E1

    def to_dict(self):
        d = asdict(self)
        d["regime"] = self.regime.value
        d["h"] = self.h
        d["curlyE2"] = d.pop("curly_E2")
        return d


class LongitudinalCoefficients:
    """Periodic coefficient functions of the longitudinal problem.

    Holds ``U``, ``B`` and the curvature ``k`` with their derivatives as
    callables on one period of length ``L``, together with the refined
    local extrema of ``U`` used by the turning-point scan. Build it from a
    curve with :func:`longitudinal_coefficients` or directly from callables
    for model problems.
    """

    def __init__(self, L, U, dU, B, dB, kappa, dkappa, nodes=SCAN_NODES):
        self.L = float(L)
        self.U, self.dU = U, dU
        self.B, self.dB = B, dB
        self.kappa, self.dkappa = kappa, dkappa
        self.grid = np.linspace(0.0, self.L, nodes, endpoint=False)
        self.U_grid = np.asarray(U(self.grid), dtype=float)
        self.minima, self.maxima = self._extrema()
        self.min_U = min(float(U(x)) for x in self.minima)
        self.max_U = max(float(U(x)) for x in self.maxima)

    @classmethod
    def constant(cls, L, U0, kappa0, B0=None):
        """Constant coefficients; ``B0`` defaults to ``-2 kappa0 U0`` (flat side)."""
        B0 = -2.0 * kappa0 * U0 if B0 is None else B0

        def const(c):
            return lambda s: np.full_like(np.asarray(s, dtype=float), c)

        return cls(L, const(U0), const(0.0), const(B0), const(0.0), const(kappa0), const(0.0))

    def _extrema(self):
        g = self.U_grid
        n = len(g)
        prev, nxt = np.roll(g, 1), np.roll(g, -1)
        mins, maxs = [], []
        ds = self.L / n
        for idx in np.flatnonzero((g <= prev) & (g < nxt)):
            mins.append(self._refine(idx, ds, 1.0))
        for idx in np.flatnonzero((g >= prev) & (g > nxt)):
            maxs.append(self._refine(idx, ds, -1.0))
        if not mins:  # constant potential
            mins = [0.0]
        if not maxs:
            maxs = [0.0]
        return np.array(mins), np.array(maxs)

    def _refine(self, idx, ds, sign):
        x0 = self.grid[idx]
        res = optimize.minimize_scalar(
            lambda x: sign * float(self.U(np.mod(x, self.L))),
            bounds=(x0 - ds, x0 + ds),
            method="bounded",
            options={"xatol": 1e-13},
        )
        return float(np.mod(res.x, self.L))

    def V(self, s, E2):
        return self.U(np.mod(s, self.L)) - E2

    def A3(self, s, E2):
        s = np.mod(s, self.L)
        return self.B(s) + 2.0 * self.kappa(s) * E2

    def A(self, s, E2):
        """Stability function; raises StabilityError where its cube is not positive."""
        a3 = np.asarray(self.A3(s, E2))
        if np.any(a3 <= 0):
            bad = np.atleast_1d(np.asarray(s, dtype=float) * np.ones_like(a3))[np.atleast_1d(a3) <= 0]
            raise StabilityError(f"stability condition fails (A^3 <= 0) at s = {bad[0]:.6g}", s=float(bad[0]))
        return np.cbrt(a3)

    def dA(self, s, E2):
        """Analytic derivative of the stability function in s."""
        s = np.mod(s, self.L)
        a = self.A(s, E2)
        return (self.dB(s) + 2.0 * self.dkappa(s) * E2) / (3.0 * a * a)


@lru_cache(maxsize=64)
def _curve_coefficients(curve, a_n):
    a2 = a_n * a_n

    def U(s):
        return a2 / curve.x0(s) ** 2

    def dU(s):
        return -2.0 * a2 * curve.q1p(s) / curve.x0(s) ** 3

    def B(s):
        x = curve.x0(s)
        return 2.0 * a2 * curve.q2p(s) / x**3 - 2.0 * curve.kappa(s) * a2 / x**2

    def dB(s):
        x = curve.x0(s)
        q1p, q2p = curve.q1p(s), curve.q2p(s)
        k, dk = curve.kappa(s), curve.dkappa(s)
        u, du = a2 / x**2, -2.0 * a2 * q1p / x**3
        return 2.0 * a2 * (curve.q2pp(s) / x**3 - 3.0 * q2p * q1p / x**4) - 2.0 * (dk * u + k * du)

    return LongitudinalCoefficients(curve.L, U, dU, B, dB, curve.kappa, curve.dkappa)


def longitudinal_coefficients(curve, scale):
    """Coefficient set for ``curve`` at scale ``scale`` (cached per pair).

    A :class:`LongitudinalCoefficients` passed as ``curve`` is returned as is.
    """
    if isinstance(curve, LongitudinalCoefficients):
        return curve
    if not isinstance(curve, MeridianCurve):
        raise DomainError("expected a MeridianCurve or LongitudinalCoefficients")
    return _curve_coefficients(curve, float(scale.a_n))


def potential_v(curve, scale, s, E2):
    """Longitudinal potential ``V = a_n^2 / X(0, s)^2 - E2``."""
    return longitudinal_coefficients(curve, scale).V(s, E2)


def stability_a(curve, scale, s, E2):
    """Stability function ``A(s; E2) > 0``; raises StabilityError otherwise."""
    return longitudinal_coefficients(curve, scale).A(s, E2)


def turning_points(curve, scale, E2):
    """Locate the roots of ``V(.; E2)`` on one period.

    Returns ``(Regime.NO_TURNING, None, None)`` when ``V < 0`` everywhere, or
    ``(Regime.TWO_TURNING, s_minus, s_plus)`` with ``V < 0`` on
    ``(s_minus, s_plus)``. When the allowed interval wraps through s = 0,
    ``s_minus`` is returned negative so that ``s_minus < s_plus`` holds.

    Raises
    ------
    RegimeError
        If ``E2`` lies below ``min U`` or ``V`` has more than two roots.
    """
    c = longitudinal_coefficients(curve, scale)
    pts = np.unique(np.concatenate([c.grid, c.minima, c.maxima]))
    vals = c.V(pts, E2)
    if np.all(vals < 0):
        return Regime.NO_TURNING, None, None
    if E2 < c.min_U:
        raise RegimeError(f"E2 = {E2:.6g} lies below min U = {c.min_U:.6g}: no allowed region")
    pos = vals >= 0
    nxt = np.roll(pos, -1)
    idx = np.flatnonzero(pos != nxt)
    if len(idx) == 0:
        raise RegimeError("V touches zero without changing sign (grazing energy)")
    if len(idx) != 2:
        raise RegimeError(f"V has {len(idx)} turning points; only two are supported")
    roots = {}
    for i in idx:
        a = pts[i]
        b = pts[i + 1] if i + 1 < len(pts) else pts[0] + c.L
        root = optimize.brentq(lambda x: float(c.V(x, E2)), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        # entering the allowed region going forward is the left turning point
        roots["minus" if pos[i] else "plus"] = float(np.mod(root, c.L))
    s_minus, s_plus = roots["minus"], roots["plus"]
    if s_minus > s_plus:
        s_minus -= c.L
    return Regime.TWO_TURNING, s_minus, s_plus


def _map_theta(s_minus, s_plus, theta):
    half = 0.5 * (s_plus - s_minus)
    return 0.5 * (s_minus + s_plus) - half * np.cos(theta), half * np.sin(theta)


def _allowed_integral(c, E2, s_minus, s_plus, weighted_fn=None):
    s, jac = _map_theta(s_minus, s_plus, _THETA)
    gap = np.maximum(-c.V(s, E2), 0.0)
    if weighted_fn is None:
        return float(np.sum(_THETA_W * np.sqrt(gap) * jac))
    # near the ends gap ~ theta^2, so jac / sqrt(gap) stays bounded
    return float(np.sum(_THETA_W * weighted_fn(s) * jac / np.sqrt(gap)))


def allowed_action(curve, scale, E2, s_minus=None, s_plus=None):
    """``int_{s-}^{s+} sqrt(E2 - U) ds`` over the allowed interval.

    Uses ``s = c - w cos(theta)``, which turns the square-root endpoint
    behaviour into a smooth integrand for Gauss-Legendre quadrature.
    """
    c = longitudinal_coefficients(curve, scale)
    if s_minus is None:
        regime, s_minus, s_plus = turning_points(c, scale, E2)
        if regime is not Regime.TWO_TURNING:
            raise RegimeError("allowed_action needs two turning points")
    return _allowed_integral(c, E2, s_minus, s_plus)


def periodic_action(curve, scale, E2):
    """``int_0^L sqrt(E2 - U) ds`` for ``E2 >= max U`` (trapezoid, spectrally accurate)."""
    c = longitudinal_coefficients(curve, scale)
    if E2 < c.max_U:
        raise RegimeError(f"E2 = {E2:.6g} below max U = {c.max_U:.6g}: turning points present")
    return float(np.mean(np.sqrt(np.maximum(E2 - c.U_grid, 0.0))) * c.L)


def solve_periodic_quantization(curve, scale, indices):
    """Solve ``int_0^L sqrt(E2 - U) = 2 pi m epsilon`` with ``V < 0`` everywhere.

    Raises
    ------
    RegimeError
        When the smallest admissible energy (``max U``) already carries more
        action than required; the Bohr-Sommerfeld rule applies instead.
    """
    c = longitudinal_coefficients(curve, scale)
    target = 2 * math.pi * indices.m * scale.epsilon
    base = c.max_U
    if periodic_action(c, scale, base) >= target:
        raise RegimeError(
            "no energy with V < 0 everywhere satisfies the periodic rule; use Bohr-Sommerfeld"
        )
    # action is at least L sqrt(E2 - max U), giving an upper bracket
    hi = base + (target / c.L) ** 2 * 1.01 + 1e-300
    while periodic_action(c, scale, hi) < target:
        hi = base + 2 * (hi - base)

    def mismatch(E2):
        return periodic_action(c, scale, E2) - target

    E2 = optimize.brentq(mismatch, base, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(mismatch(E2)) > 1e-12 * max(1.0, target):
        raise NoModeError("periodic quantization did not converge")
    return float(E2)


def solve_bohr_sommerfeld(curve, scale, indices):
    """Solve ``(1/(eps pi)) int_{s-}^{s+} sqrt|V| = m + 1/2`` for ``E2``.

    The turning points are recomputed for every trial energy. The search
    starts from the harmonic estimate at the deepest minimum of ``U`` and
    doubles the bracket until the action exceeds the target; Brent's
    method then refines inside the bracket.

    Raises
    ------
    NoModeError
        If no bracket with two turning points contains the solution.
    """
    c = longitudinal_coefficients(curve, scale)
    eps = scale.epsilon
    target = indices.m + 0.5
    u0 = c.min_U
    spread = max(c.max_U - u0, abs(u0) * 1e-12, 1e-300)
    lo = u0 + 1e-9 * spread

    def mismatch(E2):
        regime, sm, sp = turning_points(c, scale, E2)
        if regime is not Regime.TWO_TURNING:
            raise RegimeError("energy above the potential maximum")
        return _allowed_integral(c, E2, sm, sp) / (eps * math.pi) - target

    s0 = c.minima[np.argmin([float(c.U(x)) for x in c.minima])]
    d = 1e-4 * c.L
    curv = float(c.U(s0 + d) - 2 * c.U(s0) + c.U(s0 - d)) / (d * d)
    beta = max(curv / 2, 1e-300)
    step = max(eps * (2 * target) * math.sqrt(beta), 1e-6 * spread)
    hi = u0 + step
    try:
        while mismatch(hi) < 0:
            hi = u0 + 2 * (hi - u0)
            if hi > c.max_U:
                raise RegimeError("bracket exceeded max U")
    except RegimeError as exc:
        raise NoModeError(f"no Bohr-Sommerfeld solution for m = {indices.m}: {exc}") from exc
    if mismatch(lo) > 0:
        raise NoModeError("Bohr-Sommerfeld target below the bottom of the well")
    E2 = optimize.brentq(mismatch, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(E2)


def correction_e1(curve, scale, E2, regime=None, s_minus=None, s_plus=None):
    """Weighted average of ``A(s; E2)^2`` with weight ``1/sqrt|V|``.

    The average runs over one period without turning points and over
    ``(s_minus, s_plus)`` otherwise.
    """
    c = longitudinal_coefficients(curve, scale)
    if regime is None or (regime is Regime.TWO_TURNING and s_minus is None):
        regime, s_minus, s_plus = turning_points(c, scale, E2)
    if regime is Regime.NO_TURNING:
        w = 1.0 / np.sqrt(E2 - c.U_grid)
        a2 = c.A(c.grid, E2) ** 2
        return float(np.sum(w * a2) / np.sum(w))

    def a2(s):
        return c.A(s, E2) ** 2

    num = _allowed_integral(c, E2, s_minus, s_plus, a2)
    den = _allowed_integral(c, E2, s_minus, s_plus, np.ones_like)
    return num / den


def assemble_spectrum(curve, scale, indices, regime=None):
    """Full spectral record ``E2 + h t_k E1`` and ``lambda^2 = curlyE2 / eps^2``.

    Tries the periodic rule first unless ``regime`` forces one of them.
    """
    c = longitudinal_coefficients(curve, scale)
    if regime is not None:
        regime = Regime(regime)
    if regime in (None, Regime.NO_TURNING):
        try:
            E2 = solve_periodic_quantization(c, scale, indices)
            regime = Regime.NO_TURNING
        except RegimeError:
            if regime is Regime.NO_TURNING:
                raise
            regime = None
    if regime in (None, Regime.TWO_TURNING):
        E2 = solve_bohr_sommerfeld(c, scale, indices)
        regime = Regime.TWO_TURNING
    got, s_minus, s_plus = turning_points(c, scale, E2)
    if got is not regime:
        raise RegimeError(f"solution lies in regime {got.value}, expected {regime.value}")
    E1 = correction_e1(c, scale, E2, regime, s_minus, s_plus)
    t_k = airy_negative_root(indices.k).t
    curly = E2 + scale.h * t_k * E1
    data = SpectralData(
        E2=E2,
        E1=E1,
        t_k=t_k,
        curly_E2=curly,
        lambda2=curly / scale.epsilon**2,
        regime=regime,
        s_minus=s_minus,
        s_plus=s_plus,
        epsilon=scale.epsilon,
        n=scale.n,
        k=indices.k,
        m=indices.m,
    )
    _validate(c, data)
    return data


def _validate(c, data):
    if data.regime is Regime.TWO_TURNING:
        for s in (data.s_minus, data.s_plus):
            if abs(float(c.V(s, data.E2))) > 1e-10:
                raise RegimeError("turning point does not solve V = 0")
        inner = np.linspace(data.s_minus, data.s_plus, 403)[1:-1]
        if np.any(c.V(inner, data.E2) >= 0):
            raise RegimeError("V is not negative inside the allowed interval")
        c.A(np.linspace(data.s_minus, data.s_plus, 401), data.curly_E2)
    else:
        if np.any(c.V(c.grid, data.E2) >= 0):
            raise RegimeError("V is not negative on the whole period")
        c.A(c.grid, data.curly_E2)


def spectral_gap(curve, scale, indices):
    """Neighbouring-level gap ``lambda^2_{m+1} - lambda^2_m`` and the correction size.

    Returns ``(gap, correction, remainder)`` where ``correction`` is
    ``h t_k E1 / eps^2`` at level ``m`` and ``remainder = h^2 / eps^2`` is the
    scale of the neglected terms.
    """
    lo = assemble_spectrum(curve, scale, indices)
    hi = assemble_spectrum(curve, scale, ModeIndices(indices.n, indices.k, indices.m + 1))
    eps2 = scale.epsilon**2
    return hi.lambda2 - lo.lambda2, lo.correction / eps2, scale.h**2 / eps2
