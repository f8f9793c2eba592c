"""Transverse lift of the longitudinal mode: the 2-D field w(rho, s), its
localizing cutoff, the 3-D quasimode u(x, y, z) and the caustic."""

from dataclasses import dataclass
import math
from typing import Callable, Optional

import numpy as np

from .._interp import smooth_step
from ..exceptions import DomainError, LocalizationError
from ..geometry import chart_coordinates, eval_chart
from ..semiclassics import longitudinal_coefficients
from ..specfun import airy, airy_ai_prime

__all__ = [
    "FieldGrid",
    "RadialCutoff",
    "Mode2D",
    "Mode3D",
    "Caustic",
    "build_mode2d",
    "cutoff_localize",
    "build_mode3d",
    "caustic_curve",
    "transverse_normalization",
    "inner_product_3d",
]

S_NODES = 2048
RHO_NODES = 512
RHO_TAIL = 12.0
DEFAULT_C_LOC = 6.0


@dataclass(frozen=True)
class FieldGrid:
    """Samples of a 2-D field on a tensor grid ``values[i_s, i_rho]``."""

    s: np.ndarray
    rho: np.ndarray
    values: np.ndarray
    periodic: bool

    @property
    def ds(self):
        return self.s[1] - self.s[0]

    @property
    def drho(self):
        return self.rho[1] - self.rho[0]

    def norm(self):
        """L2 norm by the trapezoid rule (the field vanishes on the grid edges)."""
        return math.sqrt(np.sum(np.abs(self.values) ** 2) * self.ds * self.drho)


@dataclass(frozen=True)
class RadialCutoff:
    """``theta(r, s)``: 1 for ``r <= sqrt(h) C / k(s)``, 0 from midway to ``1/k(s)``."""

    curve: object
    h: float
    C_loc: float

    def __post_init__(self):
        if not self.C_loc > 0:
            raise DomainError("C_loc must be positive")
        if math.sqrt(self.h) * self.C_loc >= 1.0:
            raise LocalizationError(
                f"sqrt(h) C_loc = {math.sqrt(self.h) * self.C_loc:.3g} >= 1: plateau reaches the focal distance"
            )

    def bounds(self, s):
        k = self.curve.kappa(s)
        r1 = math.sqrt(self.h) * self.C_loc / k
        return r1, 0.5 * (1.0 / k - r1)

    def __call__(self, r, s):
        r1, width = self.bounds(s)
        return 1.0 - smooth_step((np.asarray(r, dtype=float) - r1) / width)


class Mode2D:
    """Two-dimensional field ``w(rho, s) = chi_0 psi`` and its cut-off version.

    ``w`` is normalized in ``L2(d rho ds)``; the transverse factor is
    ``sqrt(A) Ai(-t_k + rho A) / |Ai'(-t_k)|`` with ``A = A(s; curlyE2)``.
    """

    def __init__(self, curve, scale, spectral, mode1d, theta=None, norm_change=None, _cache=None):
        self.curve = curve
        self.scale = scale
        self.spectral = spectral
        self.mode1d = mode1d
        self.coefficients = longitudinal_coefficients(curve, scale)
        self.theta = theta
        self.norm_change = norm_change
        self.aip = abs(airy_ai_prime(-spectral.t_k))
        # uncut samples keyed by grid, shared with the cut-off copies
        self._cache = {} if _cache is None else _cache

    @property
    def h(self):
        return self.scale.h

    @property
    def C_loc(self):
        return None if self.theta is None else self.theta.C_loc

    @property
    def localized(self):
        return self.theta is not None

    def s_window(self):
        if self.mode1d.periodic:
            return 0.0, self.mode1d.L
        return self.mode1d.support

    def stability(self, s):
        E = self.spectral.curly_E2
        c = self.coefficients
        return c.A(s, E), c.dA(s, E)

    def default_rho_max(self, nodes=S_NODES):
        a, b = self.s_window()
        s = np.linspace(a, b, nodes)
        s = s[np.abs(self.mode1d(s)) > 0] if not self.mode1d.periodic else s
        A, _ = self.stability(s)
        return (self.spectral.t_k + RHO_TAIL) / float(np.min(A))

    def _evaluate(self, rho, s, A, dA, psi, dpsi, cut=True):
        t = self.spectral.t_k
        ai, _ = airy(-t + rho * A)
        corr = math.sqrt(self.h) * 0.5 * self.scale.epsilon * rho**2 * (dA / A) * dpsi
        w = np.sqrt(A) / self.aip * ai * (psi - corr)
        if cut and self.theta is not None:
            w = w * self.theta(self.h * rho, s)
        return w

    def __call__(self, rho, s):
        rho, s = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(s, dtype=float))
        # the s-dependent factors are evaluated once per distinct s
        su, inv = np.unique(s, return_inverse=True)
        inv = inv.reshape(s.shape)
        A, dA = (v[inv] for v in self.stability(su))
        psi = self.mode1d(su)[inv]
        dpsi = self.mode1d.derivative(su)[inv]
        return self._evaluate(rho, s, A, dA, psi, dpsi)

    def sample(self, s_nodes=S_NODES, rho_nodes=RHO_NODES, rho_max=None):
        """Tensor-grid samples over the s-window of the mode and ``[0, rho_max]``."""
        a, b = self.s_window()
        if self.mode1d.periodic:
            s = a + np.arange(s_nodes) * ((b - a) / s_nodes)
        else:
            s = np.linspace(a, b, s_nodes)
        rho_max = self.default_rho_max() if rho_max is None else float(rho_max)
        rho = np.linspace(0.0, rho_max, rho_nodes)
        key = (s_nodes, rho_nodes, rho_max)
        W = self._cache.get(key)
        if W is None:
            A, dA = self.stability(s)
            psi = self.mode1d(s)
            dpsi = self.mode1d.derivative(s)
            col = (lambda v: np.asarray(v)[:, None])
            W = self._evaluate(rho[None, :], col(s), col(A), col(dA), col(psi), col(dpsi), cut=False)
            if len(self._cache) >= 2:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = W
        if self.theta is not None:
            W = W * self.theta(self.h * rho[None, :], s[:, None])
        return FieldGrid(s, rho, W, self.mode1d.periodic)

    def with_theta(self, theta, norm_change=None):
        return Mode2D(self.curve, self.scale, self.spectral, self.mode1d, theta, norm_change,
                      _cache=self._cache)


def build_mode2d(curve, scale, spectral, mode1d):
    """Apply the separation symbol to ``psi``: ``w = chi_0 psi``.

    The first-order symbol term is ``-sqrt(h) (eps/2) rho^2 (A'/A) psi'``; the
    derivative ``A'`` is taken analytically from the coefficient functions.
    """
    mode = Mode2D(curve, scale, spectral, mode1d)
    a, b = mode.s_window()
    s = np.linspace(a, b, 401)
    mode.stability(s)  # raises StabilityError where A^3 <= 0
    return mode


def cutoff_localize(mode2d, C_loc=DEFAULT_C_LOC, tol=1e-6, strict=True, **grid):
    """Multiply ``w`` by the radial cutoff ``theta`` and audit the norm change.

    Raises
    ------
    LocalizationError
        If ``strict`` and the relative L2-norm change exceeds ``tol``; the
        change is recorded on the returned mode either way.
    """
    theta = RadialCutoff(mode2d.curve, mode2d.h, C_loc)
    rho_max = grid.pop("rho_max", None) or mode2d.default_rho_max()
    before = mode2d.sample(rho_max=rho_max, **grid).norm()
    out = mode2d.with_theta(theta)
    after = out.sample(rho_max=rho_max, **grid).norm()
    change = abs(after - before) / before
    if strict and change > tol:
        raise LocalizationError(
            f"cutoff changes the norm by {change:.3e} (> {tol:g}); increase C_loc"
        )
    return mode2d.with_theta(theta, change)


class Mode3D:
    """Quasimode ``u = exp(i n alpha) w~(r/h, s) / sqrt(2 pi h J)`` inside the chart region.

    The factor ``1/sqrt(2 pi h)`` makes ``||u||_{L2(T)} = ||w~||_{L2(d rho ds)}``.
    """

    def __init__(self, curve, mode2d, n):
        if not mode2d.localized:
            raise LocalizationError("build the 3-D mode from a localized field (apply cutoff_localize)")
        self.curve = curve
        self.mode2d = mode2d
        self.n = int(n)
        self.h = mode2d.h

    def _in_window(self, s):
        if self.mode2d.mode1d.periodic:
            return np.ones(s.shape, dtype=bool)
        a, b = self.mode2d.s_window()
        L = self.curve.L
        return np.any([(s + j * L >= a) & (s + j * L <= b) for j in (-1, 0, 1)], axis=0)

    def chart_values(self, r, s, alpha):
        """``u`` at chart coordinates; zero outside the chart region."""
        r, s, alpha = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, s, alpha)))
        chart = eval_chart(self.curve, r, s)
        ok = chart.valid & (r >= 0) & self._in_window(s)
        out = np.zeros(r.shape, dtype=complex)
        if np.any(ok):
            s_ok = s[ok]
            if not self.mode2d.mode1d.periodic:
                a = self.mode2d.s_window()[0]
                s_ok = a + np.mod(s_ok - a, self.curve.L)
            w = self.mode2d(r[ok] / self.h, s_ok)
            out[ok] = np.exp(1j * self.n * alpha[ok]) * w / np.sqrt(2 * math.pi * self.h * chart.J[ok])
        return out

    def __call__(self, x, y, z):
        x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
        xi = np.hypot(x, y)
        alpha = np.arctan2(x, y)
        r, s, inside = chart_coordinates(self.curve, xi, z)
        out = np.zeros(x.shape, dtype=complex)
        if np.any(inside):
            out[inside] = self.chart_values(r[inside], s[inside], alpha[inside])
        return out if out.ndim else complex(out)

    def norm(self, s_nodes=S_NODES, r_nodes=RHO_NODES, alpha_nodes=8):
        return math.sqrt(inner_product_3d(self, self, s_nodes, r_nodes, alpha_nodes).real)


def _chart_grid(modes, s_nodes, r_nodes):
    a = min(m.mode2d.s_window()[0] for m in modes)
    b = max(m.mode2d.s_window()[1] for m in modes)
    periodic = all(m.mode2d.mode1d.periodic for m in modes)
    if periodic:
        s = a + np.arange(s_nodes) * ((b - a) / s_nodes)
    else:
        s = np.linspace(a, b, s_nodes)
    r_max = max(m.h * m.mode2d.default_rho_max() for m in modes)
    r = np.linspace(0.0, r_max, r_nodes)
    return s, r


def inner_product_3d(u1, u2, s_nodes=S_NODES, r_nodes=RHO_NODES, alpha_nodes=64):
    """``<u1, u2>_{L2(T)}`` by quadrature in ``(r, s, alpha)`` with the Jacobian ``J``.

    Both modes are ``exp(i n alpha)`` times an alpha-independent profile, so the
    ``(r, s)`` part is sampled once and the alpha rule is a phase sum.
    """
    if u1.curve is not u2.curve:
        raise DomainError("inner product needs both modes on the same curve")
    s, r = _chart_grid((u1, u2), s_nodes, r_nodes)
    alpha = np.arange(alpha_nodes) * (2 * math.pi / alpha_nodes)
    S, Rr = np.meshgrid(s, r, indexing="ij")
    J = eval_chart(u1.curve, Rr, S).J
    v1 = u1.chart_values(Rr, S, 0.0)
    v2 = v1 if u2 is u1 else u2.chart_values(Rr, S, 0.0)
    radial = np.sum(np.conj(v1) * v2 * np.where(J > 0, J, 0.0))
    angular = np.sum(np.exp(1j * (u2.n - u1.n) * alpha)) * (2 * math.pi / alpha_nodes)
    return radial * angular * (s[1] - s[0]) * (r[1] - r[0])


def build_mode3d(curve, mode2d, n):
    """Lift a localized 2-D field to the solid torus."""
    if n != mode2d.scale.n:
        raise DomainError("angular number must match the scale used for the field")
    return Mode3D(curve, mode2d, n)


@dataclass(frozen=True)
class Caustic:
    """Caustic ``rho_c = t_k / A(s; curlyE2)`` and its depth ``r_c = h rho_c``."""

    rho_c: Callable
    r_c: Callable

    def sample(self, s):
        s = np.asarray(s, dtype=float)
        return s, self.r_c(s)


def caustic_curve(curve, scale, spectral):
    c = longitudinal_coefficients(curve, scale)
    E, t, h = spectral.curly_E2, spectral.t_k, scale.h

    def rho_c(s):
        return t / c.A(s, E)

    def r_c(s):
        return h * rho_c(s)

    return Caustic(rho_c, r_c)


def transverse_normalization(A, t_k, rho_nodes=4096, tail=RHO_TAIL + 8):
    """``int_0^inf A Ai(-t_k + rho A)^2 / Ai'(-t_k)^2 d rho`` for each value of ``A``.

    Composite Simpson on ``[0, (t_k + tail) / A]`` separately for every entry;
    the neglected tail is below ``Ai(tail)^2``.
    """
    A = np.atleast_1d(np.asarray(A, dtype=float))
    if rho_nodes % 2:
        rho_nodes += 1
    aip = airy_ai_prime(-t_k)
    wts = np.ones(rho_nodes + 1)
    wts[1:-1:2] = 4
    wts[2:-1:2] = 2
    out = np.empty(A.shape)
    for i, a in enumerate(A):
        rho = np.linspace(0.0, (t_k + tail) / a, rho_nodes + 1)
        ai, _ = airy(-t_k + rho * a)
        out[i] = np.sum(wts * a * ai**2) * (rho[1] - rho[0]) / 3 / aip**2
    return out
