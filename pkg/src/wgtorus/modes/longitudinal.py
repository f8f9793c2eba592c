"""Longitudinal mode psi(s): WKB exponential, uniform Airy asymptotics between
two turning points, and the parabolic-cylinder form for a narrow well."""

from dataclasses import dataclass
import math
from typing import Callable, Optional
import warnings

import numpy as np
from numpy.polynomial import Chebyshev

from .._interp import QuinticHermite, periodic_antiderivative, periodic_derivative, plateau, smooth_step
from ..exceptions import (
    CollarTooWideError,
    DomainError,
    GeometryError,
    QuantizationMismatchError,
    RegimeError,
)
from ..semiclassics import (
    Regime,
    SpectralData,
    assemble_spectrum,
    longitudinal_coefficients,
)
from ..specfun import airy, airy_negative_root, parabolic_cylinder_d

__all__ = [
    "Mode1D",
    "SmoothCutoff",
    "extension_coefficients",
    "extend_beyond_turning",
    "wkb_mode",
    "airy_branch_psi",
    "assemble_psi",
    "parabolic_mode",
    "longitudinal_mode",
]

NORM_NODES = 16384
_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class SmoothCutoff:
    """Plateau equal to 1 on ``[lo, hi]`` falling to 0 over ``width`` on each side."""

    lo: float
    hi: float
    width: float

    def __call__(self, s):
        return plateau(s, self.lo, self.hi, self.width)

    @property
    def support(self):
        return self.lo - self.width, self.hi + self.width


class Mode1D:
    """A normalized longitudinal mode.

    Parameters
    ----------
    func : callable
        Unnormalized profile, evaluated on ``support`` (values outside are 0
        unless the mode is periodic).
    A0 : float
        Normalization constant; ``psi = A0 * func``.
    kind : {"wkb", "airy", "parabolic"}
    L : float
        Period of the s-coordinate.
    support : tuple of float
        Interval outside which the mode vanishes; for periodic modes the
        whole period ``(0, L)``.
    """

    def __init__(self, func, A0, kind, L, support, periodic=False, dfunc=None,
                 delta=None, ell=None, zeta=None, fd_step=None, spectral=None):
        self.func = func
        self.A0 = float(A0)
        self.kind = kind
        self.L = float(L)
        self.support = (float(support[0]), float(support[1]))
        self.periodic = periodic
        self.dfunc = dfunc
        self.delta = delta
        self.ell = ell
        self.zeta = zeta
        self.fd_step = fd_step if fd_step is not None else 1e-4 * self.L
        self.spectral = spectral

    @property
    def regime(self):
        return Regime.NO_TURNING if self.kind == "wkb" else Regime.TWO_TURNING

    def _reduce(self, s):
        lo = self.support[0]
        return lo + np.mod(np.asarray(s, dtype=float) - lo, self.L)

    def __call__(self, s):
        s = self._reduce(s)
        if self.periodic:
            return self.A0 * self.func(s)
        inside = (s > self.support[0]) & (s < self.support[1])
        out = np.zeros(s.shape, dtype=complex)
        if np.any(inside):
            out[inside] = self.A0 * self.func(s[inside])
        return out if out.ndim else complex(out)

    def derivative(self, s):
        """``d psi / ds``: analytic when available, else a 4th-order central difference."""
        if self.dfunc is not None:
            return self.A0 * self.dfunc(self._reduce(s))
        d = self.fd_step
        s = np.asarray(s, dtype=float)
        return (self(s - 2 * d) - 8 * self(s - d) + 8 * self(s + d) - self(s + 2 * d)) / (12 * d)

    def sample(self, nodes=2048):
        """Uniform samples ``(s, psi(s))`` over one period starting at the support."""
        lo = self.support[0] if not self.periodic else 0.0
        s = lo + np.arange(nodes) * (self.L / nodes)
        return s, self(s)

    def norm(self, nodes=NORM_NODES):
        """L2 norm over one period by the trapezoid rule (spectral for smooth periodic data)."""
        if self.periodic:
            s = np.arange(nodes) * (self.L / nodes)
            return math.sqrt(np.sum(np.abs(self(s)) ** 2) * self.L / nodes)
        a, b = self.support
        s = np.linspace(a, b, nodes + 1)
        ds = (b - a) / nodes
        return math.sqrt(np.sum(np.abs(self(s)) ** 2) * ds)

    def scaled(self, A0):
        """Copy with a different normalization constant (for negative controls)."""
        return Mode1D(self.func, A0, self.kind, self.L, self.support, self.periodic, self.dfunc,
                      self.delta, self.ell, self.zeta, self.fd_step, self.spectral)


def _normalize(func, a, b, nodes=NORM_NODES):
    s = np.linspace(a, b, nodes + 1)
    val = np.sum(np.abs(func(s)) ** 2) * (b - a) / nodes
    if not val > 0:
        raise RegimeError("mode profile vanishes identically")
    return 1.0 / math.sqrt(val)


# -- WKB -------------------------------------------------------------------------


def wkb_mode(curve, scale, spectral):
    """WKB exponential for a spectrum without turning points.

    The phase is the antiderivative of ``sqrt|V|`` plus the first-order
    correction, integrated spectrally on the periodic coefficient grid.

    Raises
    ------
    QuantizationMismatchError
        If the total phase over a period misses a multiple of 2 pi by more
        than 1e-6.
    """
    if spectral.regime is not Regime.NO_TURNING:
        raise RegimeError("wkb_mode needs the NoTurningPoints regime")
    c = longitudinal_coefficients(curve, scale)
    E2, E1, eps = spectral.E2, spectral.E1, scale.epsilon
    ht = scale.h * spectral.t_k
    grid = c.grid
    n = len(grid)
    gap = E2 - c.U_grid
    if np.any(gap <= 0):
        raise RegimeError("V must be negative on the whole period")
    root = np.sqrt(gap)
    dens = (root + 0.5 * ht * (E1 - c.A(grid, E2) ** 2) / root) / eps
    phase, mean = periodic_antiderivative(dens, c.L)
    total = mean * c.L
    defect = abs(np.exp(1j * total) - 1.0)
    if defect > 1e-6:
        raise QuantizationMismatchError(f"WKB phase not periodic: |exp(i Phi(L)) - 1| = {defect:.3e}")
    ddens = periodic_derivative(dens, c.L)
    phi = QuinticHermite(0.0, c.L / n, phase, np.append(dens, dens[0]), np.append(ddens, ddens[0]),
                         period=c.L, jump=total)
    V0 = E2 - float(c.U(0.0))

    def density(s):
        g = E2 - c.U(s)
        r = np.sqrt(g)
        return (r + 0.5 * ht * (E1 - c.A(s, E2) ** 2) / r) / eps

    def func(s):
        return (V0 / (E2 - c.U(s))) ** 0.25 * np.exp(1j * phi(s))

    def dfunc(s):
        g = E2 - c.U(s)
        return func(s) * (0.25 * c.dU(s) / g + 1j * density(s))

    A0 = 1.0 / math.sqrt(np.mean(np.abs(func(grid)) ** 2) * c.L)
    return Mode1D(func, A0, "wkb", c.L, (0.0, c.L), periodic=True, dfunc=dfunc, spectral=spectral)


# -- extension operator ------------------------------------------------------------


def extension_coefficients(ell=3):
    """Coefficients ``c_j`` with ``sum_j c_j (-j)^p = 1`` for ``p < ell``."""
    if isinstance(ell, bool) or int(ell) != ell or ell < 1:
        raise DomainError("extension order must be a positive integer")
    ell = int(ell)
    j = np.arange(1, ell + 1, dtype=float)
    M = np.vander(-j, ell, increasing=True).T
    return np.linalg.solve(M, np.ones(ell))


def extend_beyond_turning(f, s_turn, side, ell=3, interval=None):
    """Reflection extension of ``f`` across the turning point ``s_turn``.

    Returns ``g(s) = sum_j c_j f(s_turn + j (s_turn - s))``, which matches
    polynomials of degree below ``ell`` exactly. ``side`` is ``"+"`` for
    ``s >= s_turn`` and ``"-"`` for ``s <= s_turn``. When ``interval`` is
    given, reflected nodes must stay inside it.
    """
    if side not in ("+", "-"):
        raise DomainError("side must be '+' or '-'")
    coef = extension_coefficients(ell)
    sign = 1.0 if side == "+" else -1.0

    def g(s):
        s = np.asarray(s, dtype=float)
        if np.any(sign * (s - s_turn) < 0):
            raise DomainError("extension evaluated on the wrong side of the turning point")
        nodes = [s_turn + j * (s_turn - s) for j in range(1, len(coef) + 1)]
        if interval is not None:
            far = nodes[-1]
            if np.any(far < interval[0]) or np.any(far > interval[1]):
                raise CollarTooWideError("reflected nodes leave the interval; shrink delta")
        return sum(cj * f(x) for cj, x in zip(coef, nodes))

    return g


# -- uniform Airy asymptotics ---------------------------------------------------------


class _TurningPointData:
    """Action and phase-correction integrals between the turning points.

    Integrals use the map ``s = c - w cos(theta)`` on which all integrands
    are smooth; they are represented by Chebyshev series in ``theta`` and
    accumulated separately from each end to keep relative accuracy near
    the turning points.
    """

    DEG = 160

    def __init__(self, c, spectral, h, eps):
        self.c = c
        self.eps = eps
        self.E2 = spectral.E2
        self.E1 = spectral.E1
        self.sm, self.sp = spectral.s_minus, spectral.s_plus
        self.mid = 0.5 * (self.sm + self.sp)
        self.half = 0.5 * (self.sp - self.sm)
        self.near = 0.02 * (self.sp - self.sm)
        ht = h * spectral.t_k

        def s_of(theta):
            return self.mid - self.half * np.cos(theta)

        def f_action(theta):
            return np.sqrt(self.gap(s_of(theta))) * self.half * np.sin(theta)

        def f_corr(theta):
            s = s_of(theta)
            return (self.E1 - c.A(s, self.E2) ** 2) * self.half * np.sin(theta) / np.sqrt(self.gap(s))

        dom = [0.0, math.pi]
        act = Chebyshev.interpolate(f_action, self.DEG, domain=dom)
        corr = Chebyshev.interpolate(f_corr, self.DEG, domain=dom)
        self._act_m = act.integ(lbnd=0.0)
        self._act_p = -act.integ(lbnd=math.pi)
        self._corr_m = corr.integ(lbnd=0.0)
        self._corr_p = -corr.integ(lbnd=math.pi)
        self.g_scale = 0.5 * ht
        self.total_action = float(self._act_m(math.pi))

    def theta(self, s):
        return np.arccos(np.clip((self.mid - s) / self.half, -1.0, 1.0))

    def gap(self, s):
        """``E2 - U(s) >= 0`` accurate in relative terms near both turning points."""
        s = np.asarray(s, dtype=float)
        out = np.maximum(self.E2 - self.c.U(s), 0.0)
        for st, sgn in ((self.sm, -1.0), (self.sp, 1.0)):
            close = np.abs(s - st) < self.near
            if np.any(close):
                x = s[close]
                # E2 - U(x) = U(st) - U(x) = int_x^st U'
                half = 0.5 * (st - x)
                nodes = 0.5 * (st + x)[:, None] + half[:, None] * _GL8_X[None, :]
                val = np.sum(self.c.dU(nodes) * _GL8_W[None, :], axis=1) * half
                out[close] = np.maximum(val, 0.0)
        return out

    def action(self, s, side):
        """``|int_{s_side}^s sqrt|V||``."""
        th = self.theta(s)
        return np.maximum(self._act_p(th) if side == "+" else self._act_m(th), 0.0)

    def g1(self, s, side):
        """Phase correction ``g1(s)`` (vanishes at both turning points)."""
        th = self.theta(s)
        if side == "+":
            return self.g_scale * self._corr_p(th) / self.eps
        return -self.g_scale * self._corr_m(th) / self.eps


class _AiryBranch:
    """Smooth ingredients of one Airy branch and its reflected extension."""

    DEG = 96

    def __init__(self, data, eps, m, side, delta, ell):
        self.data = data
        self.side = side
        self.cfac = 1.5 / eps
        self.kappa = 1.0 if side == "+" else (-1.0) ** m
        sm, sp = data.sm, data.sp
        if side == "+":
            dom = [sm + 0.5 * delta, sp]
            self.s_turn = sp
        else:
            dom = [sm, sp - 0.5 * delta]
            self.s_turn = sm
        self.domain = dom

        def ingredients(s):
            S = data.action(s, side)
            gap = data.gap(s)
            g = data.g1(s, side)
            phi = S ** (2.0 / 3.0)
            return phi, (phi / gap) ** 0.25, np.cos(g), np.sin(g) / (phi * gap) ** 0.25

        nodes = Chebyshev.basis(self.DEG + 1, domain=dom).roots()
        vals = ingredients(nodes)
        self._fits = [Chebyshev.fit(nodes, v, self.DEG, domain=dom) for v in vals]
        coef = extension_coefficients(ell)
        self._coef = coef
        reach = len(coef) * 2 * delta
        if side == "+" and sp - reach < dom[0] or side == "-" and sm + reach > dom[1]:
            raise CollarTooWideError("reflected nodes leave the allowed interval; shrink delta")

    def _ingredients(self, s):
        s = np.asarray(s, dtype=float)
        beyond = (s > self.s_turn) if self.side == "+" else (s < self.s_turn)
        out = [np.empty(s.shape) for _ in range(4)]
        inside = ~beyond
        if np.any(inside):
            x = s[inside]
            for o, f in zip(out, self._fits):
                o[inside] = f(x)
        if np.any(beyond):
            x = s[beyond]
            st = self.s_turn
            for o, f in zip(out, self._fits):
                o[beyond] = sum(cj * f(st + j * (st - x)) for j, cj in enumerate(self._coef, start=1))
        return out

    def __call__(self, s):
        phi, P, cosg, S = self._ingredients(s)
        c = self.cfac
        ai, aip = airy(-(c ** (2.0 / 3.0)) * phi)
        sgn = -1.0 if self.side == "+" else 1.0
        bracket = c ** (1.0 / 6.0) * P * cosg * ai + sgn * c ** (-1.0 / 6.0) * S * aip
        # both branches share the phase exp(i pi/4) so that they agree in the bulk
        return math.sqrt(2 * math.pi) * np.exp(0.25j * math.pi) * self.kappa * bracket


def _turning_data(curve, scale, spectral):
    if spectral.regime is not Regime.TWO_TURNING:
        raise RegimeError("turning-point asymptotics need the TwoTurningPoints regime")
    c = longitudinal_coefficients(curve, scale)
    data = _TurningPointData(c, spectral, scale.h, scale.epsilon)
    return data


def airy_branch_psi(curve, scale, spectral, side, delta=None, ell=3):
    """Uniform Airy branch ``psi_+`` or ``psi_-`` (unnormalized).

    The returned callable covers the branch's own turning point and its
    reflected collar; it is singular at the opposite turning point, so it
    is only meaningful on ``(s_- + delta/2, s_+ + 2 delta)`` for ``"+"`` and
    mirror-wise for ``"-"``.
    """
    if side not in ("+", "-"):
        raise DomainError("side must be '+' or '-'")
    width = spectral.s_plus - spectral.s_minus
    delta = 0.1 * width if delta is None else delta
    data = _turning_data(curve, scale, spectral)
    return _AiryBranch(data, scale.epsilon, spectral.m, side, delta, ell)


def assemble_psi(curve, scale, spectral, delta=None, ell=3):
    """Uniform asymptotic mode between two turning points.

    ``psi_-`` covers the left turning point and ``psi_+`` the right one. In the
    bulk ``(s_- + delta, s_+ - delta)``, where both are valid and agree to
    O(h^2), they are blended with a smooth partition of unity. Each branch
    continues past its turning point through the reflection extension of its
    smooth ingredients, and the result is multiplied by the cutoff ``zeta``
    (1 on ``[s_- - delta, s_+ + delta]``, 0 beyond a further ``delta``).
    """
    width = spectral.s_plus - spectral.s_minus
    delta = 0.1 * width if delta is None else float(delta)
    if not 0 < delta:
        raise DomainError("delta must be positive")
    data = _turning_data(curve, scale, spectral)
    plus = _AiryBranch(data, scale.epsilon, spectral.m, "+", delta, ell)
    minus = _AiryBranch(data, scale.epsilon, spectral.m, "-", delta, ell)
    sm, sp = spectral.s_minus, spectral.s_plus
    zeta = SmoothCutoff(sm - delta, sp + delta, delta)
    lo_b, hi_b = sm + delta, sp - delta

    def func(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape, dtype=complex)
        z = zeta(s)
        live = z > 0
        chi = smooth_step((s - lo_b) / (hi_b - lo_b))
        use_m = live & (chi < 1)
        use_p = live & (chi > 0)
        if np.any(use_m):
            out[use_m] += (1 - chi[use_m]) * minus(s[use_m])
        if np.any(use_p):
            out[use_p] += chi[use_p] * plus(s[use_p])
        return out * z

    a, b = zeta.support
    A0 = _normalize(func, a, b)
    root = max(math.sqrt(max(spectral.E2 - data.c.min_U, 0.0)), 1e-12)
    step = 0.02 * scale.epsilon / root
    return Mode1D(func, A0, "airy", data.c.L, (a, b), delta=delta, ell=ell, zeta=zeta,
                  fd_step=step, spectral=spectral)


# -- parabolic cylinder form ---------------------------------------------------------


def parabolic_mode(curve, scale, indices, center=None):
    """Parabolic-cylinder mode and spectrum for a narrow symmetric well.

    The well is expanded about ``center`` (default: the minimum of U), where
    the boundary point is farthest from the axis: ``Q1 = q0 - q2 (s - s0)^2``.
    Returns ``(Mode1D, SpectralData)``.

    Raises
    ------
    GeometryError
        If ``Q2'(s0) <= 0`` or ``q2 <= 0``.
    """
    c = longitudinal_coefficients(curve, scale)
    s0 = float(c.minima[np.argmin([float(c.U(x)) for x in c.minima])]) if center is None else float(center)
    eps, h = scale.epsilon, scale.h
    an2 = scale.a_n**2
    d = 1e-3
    q1 = curve.q1
    q0 = float(q1(s0))
    q2 = -float(q1(s0 + d) - 2 * q1(s0) + q1(s0 - d)) / (2 * d * d)
    if float(curve.q2p(s0)) <= 0 or q2 <= 0:
        raise GeometryError("parabolic form needs Q2'(s0) > 0 and q2 > 0 at the expansion point")
    x0 = curve.R + q0
    beta = 2 * q2 * an2 / x0**3
    E2 = an2 / x0**2 + eps * (indices.m + 0.5) * 2 * math.sqrt(beta)
    t_k = airy_negative_root(indices.k).t
    a0 = float(c.A(s0, E2))
    E1 = a0 * a0
    A1 = 2 * a0 * float(c.dA(s0, E2))
    s_star = math.sqrt(max(E2 - an2 / x0**2, 0.0) / beta)
    if s_star > 5 * math.sqrt(h):
        warnings.warn(f"turning-point half-width {s_star:.3g} exceeds 5 sqrt(h)", RuntimeWarning, stacklevel=2)
    scale_x = math.sqrt(2.0) * beta**0.25 / math.sqrt(eps)
    shift = h * t_k * A1 / (math.sqrt(2.0) * math.sqrt(eps) * beta**0.75)
    m = indices.m

    def func(s):
        return parabolic_cylinder_d(m, (np.asarray(s, dtype=float) - s0) * scale_x + shift) + 0j

    # D_m decays like exp(-eta^2/4); eta = 2 sqrt(m + 1) + 12 is far in the tail
    reach = (2 * math.sqrt(m + 1) + 12 + abs(shift)) / scale_x
    if 2 * reach >= c.L:
        raise RegimeError("parabolic mode is not localized within one period")
    a, b = s0 - reach, s0 + reach
    A0 = _normalize(func, a, b)
    curly = E2 + h * t_k * E1
    spectral = SpectralData(E2=E2, E1=E1, t_k=t_k, curly_E2=curly, lambda2=curly / eps**2,
                            regime=Regime.TWO_TURNING, s_minus=s0 - s_star, s_plus=s0 + s_star,
                            epsilon=eps, n=scale.n, k=indices.k, m=m)

    def dfunc(s):
        x = (np.asarray(s, dtype=float) - s0) * scale_x + shift
        # D_m'(x) = x D_m / 2 - D_{m+1}
        return (0.5 * x * parabolic_cylinder_d(m, x) - parabolic_cylinder_d(m + 1, x)) * scale_x + 0j

    mode = Mode1D(func, A0, "parabolic", c.L, (a, b), dfunc=dfunc, spectral=spectral)
    return mode, spectral


def longitudinal_mode(curve, scale, spectral, delta=None, ell=3):
    """Dispatch on the spectral regime: WKB or uniform Airy mode."""
    if spectral.regime is Regime.NO_TURNING:
        return wkb_mode(curve, scale, spectral)
    return assemble_psi(curve, scale, spectral, delta=delta, ell=ell)
