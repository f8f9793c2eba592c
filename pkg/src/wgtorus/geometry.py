"""Generating curve of the torus from its curvature, and the (r, s, alpha) chart.

The meridian curve S is parametrized by arclength s in [0, L):
``x = R + Q1(s)``, ``z = Q2(s)`` with tangent angle ``a(s) = int_0^s k - shift``.
Points near S are addressed by the inner-normal depth r, so that

    X(r, s) = R + Q1(s) - r Q2'(s),    Z(r, s) = Q2(s) + r Q1'(s).
"""

from dataclasses import dataclass, field
import math
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from ._interp import QuinticHermite, periodic_antiderivative
from .exceptions import CurveNotClosedError, DomainError, GeometryError, OutOfChartError

__all__ = [
    "CurvatureProfile",
    "MeridianCurve",
    "ChartPoint",
    "triangle_profile",
    "circle_profile",
    "tabulated_profile",
    "build_curve",
    "eval_chart",
    "invert_chart",
    "chart_coordinates",
]

TWO_PI = 2 * math.pi
DEFAULT_NODES = 4096


@dataclass(frozen=True)
class CurvatureProfile:
    """L-periodic positive curvature k(s) of a closed convex curve.

    ``gamma`` is the normalization integral of the raw shape function for
    profiles made by :func:`triangle_profile`; the tangent angle is shifted
    by it. Other profiles leave it ``None`` (no shift).
    """

    length: float
    kappa: Callable
    dkappa: Callable
    gamma: Optional[float] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, s):
        return self.kappa(np.mod(s, self.length))

    def derivative(self, s):
        return self.dkappa(np.mod(s, self.length))

    @property
    def shift(self):
        return 0.0 if self.gamma is None else self.gamma

    def total_turning(self):
        val, _ = integrate.quad(self.kappa, 0.0, self.length, epsabs=1e-13, epsrel=1e-13, limit=400)
        return val

    def validate(self, samples=4096):
        """Check positivity and total turning 2 pi; raise DomainError otherwise."""
        s = np.linspace(0.0, self.length, samples, endpoint=False)
        if np.min(self.kappa(s)) <= 0:
            raise DomainError("curvature must be strictly positive (convex curve)")
        turning = self.total_turning()
        if abs(turning - TWO_PI) > 1e-8:
            raise DomainError(f"total turning {turning!r} differs from 2 pi")
        return self


def _gauss_sum(s, centers, sigma):
    return sum(np.exp(-((s - c) ** 2) / sigma**2) for c in centers)


def _gauss_sum_prime(s, centers, sigma):
    return sum(-2 * (s - c) / sigma**2 * np.exp(-((s - c) ** 2) / sigma**2) for c in centers)


def triangle_profile(sigma=0.4, length=TWO_PI):
    """Curvature of an equilateral triangle with Gaussian-rounded corners.

    ``k(s) = (2 pi / gamma) f(s)`` where ``f`` is a sum of four Gaussians of
    width ``sigma`` centred at 0, 1/3, 2/3 and 1 of the period and
    ``gamma = int_0^L f``. Both ``s`` and ``sigma`` are measured in units of
    a 2 pi period, so ``length = 2 pi`` is the literal shape.
    """
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if not length > 0:
        raise DomainError("curve length must be positive")
    scale = TWO_PI / length
    centers = (0.0, TWO_PI / 3, 2 * TWO_PI / 3, TWO_PI)

    def raw(s):
        return _gauss_sum(np.asarray(s, dtype=float) * scale, centers, sigma)

    gamma, _ = integrate.quad(raw, 0.0, length, epsabs=1e-13, epsrel=1e-13, limit=400)
    amp = TWO_PI / gamma

    def kappa(s):
        return amp * raw(np.mod(s, length))

    def dkappa(s):
        u = np.mod(np.asarray(s, dtype=float), length) * scale
        return amp * scale * _gauss_sum_prime(u, centers, sigma)

    return CurvatureProfile(length, kappa, dkappa, gamma, "triangle", {"sigma": sigma})


def circle_profile(length=TWO_PI):
    """Constant curvature ``2 pi / L``: a circle of radius ``L / 2 pi``."""
    if not length > 0:
        raise DomainError("curve length must be positive")
    k0 = TWO_PI / length

    def kappa(s):
        return np.full_like(np.asarray(s, dtype=float), k0)

    def dkappa(s):
        return np.zeros_like(np.asarray(s, dtype=float))

    return CurvatureProfile(length, kappa, dkappa, None, "circle", {})


def tabulated_profile(s, k):
    """Periodic cubic-spline curvature through samples ``(s_j, k_j)``.

    The samples span one period; the last abscissa is the period length and
    its curvature must equal the first. The result is rescaled so that the
    total turning is exactly 2 pi.
    """
    s = np.asarray(s, dtype=float)
    k = np.asarray(k, dtype=float)
    if s.ndim != 1 or s.shape != k.shape or len(s) < 4:
        raise DomainError("tabulated profile needs matching 1-D arrays with at least 4 samples")
    if s[0] != 0.0 or np.any(np.diff(s) <= 0):
        raise DomainError("abscissae must start at 0 and increase strictly")
    if np.any(k <= 0):
        raise DomainError("curvature must be strictly positive (convex curve)")
    k = k.copy()
    k[-1] = k[0]
    spline = CubicSpline(s, k, bc_type="periodic")
    length = float(s[-1])
    scale = TWO_PI / spline.integrate(0.0, length)
    deriv = spline.derivative()

    def kappa(x):
        return scale * spline(np.mod(x, length))

    def dkappa(x):
        return scale * deriv(np.mod(x, length))

    return CurvatureProfile(length, kappa, dkappa, None, "tabulated", {})


class MeridianCurve:
    """The closed meridian curve built from a curvature profile.

    Tangent and normal are evaluated from the interpolated turning angle, so
    the unit-speed property holds to rounding; positions come from a
    quintic Hermite interpolant of the spectrally integrated tangent.
    """

    def __init__(self, profile, R, nodes=DEFAULT_NODES):
        if not R > 0:
            raise DomainError("rotation radius R must be positive")
        self.profile = profile
        self.R = float(R)
        self.L = float(profile.length)
        self.nodes = int(nodes)
        self.ds = self.L / self.nodes
        s = np.linspace(0.0, self.L, self.nodes + 1)
        self.s_nodes = s
        k = profile(s[:-1])
        dk = profile.derivative(s[:-1])
        turning, kbar = periodic_antiderivative(k, self.L)
        a = turning - profile.shift
        ca, sa = np.cos(a[:-1]), np.sin(a[:-1])
        q1, mean1 = periodic_antiderivative(ca, self.L)
        q2, mean2 = periodic_antiderivative(sa, self.L)
        self.closure_error = float(self.L * (abs(mean1) + abs(mean2)))
        if self.closure_error > 1e-6:
            raise CurveNotClosedError(
                f"curve fails to close: |Q(L) - Q(0)| = {self.closure_error:.3e}"
            )
        kk = np.append(k, k[0])
        dkk = np.append(dk, dk[0])
        self.total_turning = float(kbar * self.L)
        self._a = QuinticHermite(0.0, self.ds, a, kk, dkk, period=self.L, jump=self.total_turning)
        self._q1 = QuinticHermite(0.0, self.ds, q1, np.cos(a), -kk * np.sin(a), period=self.L)
        self._q2 = QuinticHermite(0.0, self.ds, q2, np.sin(a), kk * np.cos(a), period=self.L)
        self.a_nodes = a
        self.q1_nodes = q1
        self.q2_nodes = q2
        if np.min(self.R + q1) <= 0:
            raise GeometryError("the curve crosses the rotation axis (R + Q1 <= 0)")
        self._tree = cKDTree(np.column_stack([self.R + q1[:-1], q2[:-1]]))

    def kappa(self, s):
        return self.profile(s)

    def dkappa(self, s):
        return self.profile.derivative(s)

    def a(self, s):
        return self._a(s)

    def q1(self, s):
        return self._q1(s)

    def q2(self, s):
        return self._q2(s)

    def q1p(self, s):
        return np.cos(self._a(s))

    def q2p(self, s):
        return np.sin(self._a(s))

    def q1pp(self, s):
        return -self.kappa(s) * np.sin(self._a(s))

    def q2pp(self, s):
        return self.kappa(s) * np.cos(self._a(s))

    def x0(self, s):
        """Distance ``X(0, s) = R + Q1(s)`` of the boundary point from the axis."""
        return self.R + self._q1(s)

    def point(self, s):
        return self.R + self._q1(s), self._q2(s)

    def inner_normal(self, s):
        ang = self._a(s)
        return -np.sin(ang), np.cos(ang)

    def nearest_node(self, xi, z):
        _, idx = self._tree.query(np.column_stack([np.ravel(xi), np.ravel(z)]))
        return self.s_nodes[idx].reshape(np.shape(xi))

    def max_curvature(self):
        return float(np.max(self.profile(self.s_nodes[:-1])))

    def diameter(self):
        x = self.R + self.q1_nodes
        z = self.q2_nodes
        return float(max(np.ptp(x), np.ptp(z)))


def build_curve(profile, R, nodes=DEFAULT_NODES):
    """Integrate a curvature profile into a closed meridian curve at radius ``R``."""
    return MeridianCurve(profile, R, nodes)


@dataclass(frozen=True)
class ChartPoint:
    r: np.ndarray
    s: np.ndarray
    alpha: Optional[np.ndarray]
    X: np.ndarray
    Z: np.ndarray
    J: np.ndarray
    h_s: np.ndarray
    valid: np.ndarray


def eval_chart(curve, r, s, alpha=None):
    """Evaluate the revolved chart at ``(r, s)``.

    ``valid`` is False where ``r >= 1/k(s)``, beyond the focal distance.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    ang = curve.a(s)
    q1p, q2p = np.cos(ang), np.sin(ang)
    X = curve.R + curve.q1(s) - r * q2p
    Z = curve.q2(s) + r * q1p
    k = curve.kappa(s)
    h_s = 1.0 - r * k
    J = h_s * X
    valid = r * k < 1.0
    return ChartPoint(r, s, alpha, X, Z, J, h_s, valid)


def _project(curve, xi, z, maxiter=50):
    """Newton projection onto the curve; returns ``(r, s, ok)`` per point."""
    xi = np.asarray(xi, dtype=float)
    z = np.asarray(z, dtype=float)
    s = curve.nearest_node(xi, z).astype(float)
    ok = np.ones(s.shape, dtype=bool)
    for _ in range(maxiter):
        px, pz = curve.point(s)
        ang = curve.a(s)
        tx, tz = np.cos(ang), np.sin(ang)
        dx, dz = xi - px, z - pz
        f = dx * tx + dz * tz
        # d/ds of (P - C(s)).T(s) = -1 + k (P - C).n
        fp = -1.0 + curve.kappa(s) * (-dx * tz + dz * tx)
        ok &= fp < 0
        step = np.where(ok, f / np.where(ok, fp, -1.0), 0.0)
        s = s - step
        if np.all(np.abs(step) < 1e-15 * max(1.0, curve.L)):
            break
    s = np.mod(s, curve.L)
    px, pz = curve.point(s)
    nx, nz = curve.inner_normal(s)
    r = (xi - px) * nx + (z - pz) * nz
    return r, s, ok


def chart_coordinates(curve, xi, z, tol=1e-10):
    """Vectorized chart inversion without raising.

    Returns ``(r, s, inside)`` where ``inside`` marks points that invert
    accurately with ``0 <= r < 1/k(s)``, i.e. points of the chart region
    inside the domain.
    """
    r, s, ok = _project(curve, xi, z)
    chart = eval_chart(curve, r, s)
    err = np.abs(chart.X - xi) + np.abs(chart.Z - z)
    inside = ok & (err <= tol) & chart.valid & (r >= 0)
    return r, s, inside


def invert_chart(curve, xi, z, tol=1e-10):
    """Return ``(r, s)`` with ``X(r, s) = xi`` and ``Z(r, s) = z``.

    Projects the point onto the curve with Newton's method on the foot
    parameter ``s``, seeded at the nearest grid node, and takes ``r`` as the
    signed inner-normal distance.

    Raises
    ------
    OutOfChartError
        If the projection does not converge or the point is at or beyond
        the focal distance ``1/k(s)``.
    """
    r, s, ok = _project(curve, xi, z)
    if not np.all(ok):
        raise OutOfChartError("projection onto the curve is not unique (point beyond focal distance)")
    chart = eval_chart(curve, r, s)
    err = np.abs(chart.X - np.asarray(xi)) + np.abs(chart.Z - np.asarray(z))
    if np.any(err > tol) or np.any(~chart.valid):
        raise OutOfChartError("point lies outside the chart region r < 1/k(s)")
    if r.ndim == 0:
        return float(r), float(s)
    return r, s
