"""Independent checks of the quasimode construction.

Residuals of the 1-D and 2-D operators are measured with 4th-order finite
differences, their h-orders with log-log fits; a dense finite-difference
eigensolver serves as an oracle for the longitudinal spectrum; the audits
check normalization and orthogonality.
"""

from dataclasses import dataclass, field
from enum import Enum
import logging
import math
from typing import Optional
import warnings

import numpy as np
from scipy import linalg

from .exceptions import AuditError, DomainError, LocalizationError, OracleError
from .geometry import eval_chart
from .modes.field import (
    DEFAULT_C_LOC,
    RHO_NODES,
    S_NODES,
    build_mode2d,
    cutoff_localize,
    inner_product_3d,
    transverse_normalization,
)
from .modes.longitudinal import longitudinal_mode
from .semiclassics import ModeIndices, Regime, ScaleParams, assemble_spectrum, longitudinal_coefficients

__all__ = [
    "OperatorId",
    "ResidualReport",
    "ScalingFit",
    "SweepResult",
    "AuditCheck",
    "AuditReport",
    "fd_d1",
    "fd_d2",
    "apply_l0",
    "apply_h_2d",
    "apply_delta2",
    "fit_scaling",
    "quasimode_order",
    "residual_sweep",
    "fd_oracle_1d",
    "fd_level",
    "fd_spectrum_1d",
    "audit_normalizations",
]

log = logging.getLogger(__name__)

L0_NODES = 4096
ORACLE_NODES = 2048
CONVERGENCE_TOL = 0.05
ROUNDING_FLOOR = 1e-11


class OperatorId(str, Enum):
    L0_1D = "L0_1d"
    H_2D = "H_2d"
    DELTA2_2D = "Delta2_2d"
    LAPLACE3D_ORDER = "Laplace3d_order"


@dataclass(frozen=True)
class ResidualReport:
    """L2 norm of an operator applied to a mode on a uniform grid.

    ``converged`` is True only when the residual on the doubled grid differs
    by less than 5 %; it is None when the doubling check was skipped.
    """

    operator_id: OperatorId
    l2_norm: float
    h: float
    grid_spec: dict
    converged: Optional[bool] = None
    refined_norm: Optional[float] = None

    def __post_init__(self):
        if not self.l2_norm >= 0:
            raise DomainError("residual norm must be nonnegative")

    def to_dict(self):
        return {
            "operator_id": self.operator_id.value,
            "h": self.h,
            "l2_norm": self.l2_norm,
            "refined_norm": self.refined_norm,
            "converged": self.converged,
            "grid_spec": self.grid_spec,
        }


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line through ``(log x, log y)``; ``fitted_order`` is the slope."""

    pairs: tuple
    fitted_order: float
    r_squared: float
    intercept: float
    monotone: bool
    operator_id: Optional[OperatorId] = None

    def to_dict(self):
        return {
            "operator_id": None if self.operator_id is None else self.operator_id.value,
            "pairs": [list(p) for p in self.pairs],
            "fitted_order": self.fitted_order,
            "r_squared": self.r_squared,
            "intercept": self.intercept,
            "monotone": self.monotone,
        }


# ---------------------------------------------------------------------------
# finite differences

def _pad(f, periodic):
    if periodic:
        return np.concatenate([f[-2:], f, f[:2]])
    z = np.zeros((2,) + f.shape[1:], dtype=f.dtype)
    return np.concatenate([z, f, z])


def fd_d1(f, dx, axis=0, periodic=False):
    """4th-order central first derivative; zero padding unless ``periodic``."""
    g = _pad(np.moveaxis(np.asarray(f), axis, 0), periodic)
    out = (g[:-4] - 8 * g[1:-3] + 8 * g[3:-1] - g[4:]) / (12 * dx)
    return np.moveaxis(out, 0, axis)


def fd_d2(f, dx, axis=0, periodic=False, wall=False):
    """4th-order second derivative.

    With ``wall`` the first two rows use one-sided stencils, for a field that
    is defined only on ``x >= x_0`` (no data beyond the wall).
    """
    f0 = np.moveaxis(np.asarray(f), axis, 0)
    g = _pad(f0, periodic)
    out = (-g[4:] + 16 * g[3:-1] - 30 * g[2:-2] + 16 * g[1:-3] - g[:-4]) / (12 * dx**2)
    if wall:
        out[0] = (45 * f0[0] - 154 * f0[1] + 214 * f0[2] - 156 * f0[3] + 61 * f0[4] - 10 * f0[5]) / (12 * dx**2)
        out[1] = (10 * f0[0] - 15 * f0[1] - 4 * f0[2] + 14 * f0[3] - 6 * f0[4] + f0[5]) / (12 * dx**2)
    return np.moveaxis(out, 0, axis)


def _l2(values, *spacings):
    return math.sqrt(float(np.sum(np.abs(values) ** 2)) * math.prod(spacings))


def _finish(op, h, grid, base, refined):
    converged = None
    if refined is not None:
        scale = max(base, refined)
        # residuals at rounding level count as converged
        converged = bool(scale < ROUNDING_FLOOR or abs(refined - base) < CONVERGENCE_TOL * scale)
        if not converged:
            warnings.warn(f"{op.value}: residual not grid-converged ({base:.3e} vs {refined:.3e}); refine the grid",
                          RuntimeWarning, stacklevel=3)
    return ResidualReport(op, base, h, grid, converged, refined)


# ---------------------------------------------------------------------------
# residual operators

def _l0_residual(c, scale, spectral, mode1d, nodes):
    E, t, h, eps = spectral.curly_E2, spectral.t_k, scale.h, scale.epsilon
    if mode1d.periodic:
        s = np.arange(nodes) * (mode1d.L / nodes)
    else:
        s = np.linspace(*mode1d.support, nodes)
    ds = s[1] - s[0]
    psi = mode1d(s)
    res = -eps**2 * fd_d2(psi, ds, periodic=mode1d.periodic) + (c.V(s, E) + h * t * c.A(s, E) ** 2) * psi
    return _l2(res, ds), ds


def apply_l0(curve, scale, spectral, mode1d, nodes=L0_NODES, check=True):
    """Residual of ``p_s^2 + V(s; curlyE2) + h t_k A^2(s; curlyE2)`` on ``psi``.

    Periodic modes use a periodic grid over ``[0, L)``; modes with compact
    support are sampled on their support with zero padding outside.
    """
    c = longitudinal_coefficients(curve, scale)
    base, ds = _l0_residual(c, scale, spectral, mode1d, nodes)
    refined = _l0_residual(c, scale, spectral, mode1d, 2 * nodes)[0] if check else None
    grid = {"s_nodes": nodes, "ds": ds, "periodic": mode1d.periodic}
    return _finish(OperatorId.L0_1D, scale.h, grid, base, refined)


def _grids(mode2d, s_nodes, rho_nodes, rho_max, check):
    """Field samples on the requested grid and, if ``check``, on the doubled one.

    The doubled grid contains the base grid, so one evaluation serves both.
    """
    rho_max = mode2d.default_rho_max() if rho_max is None else rho_max
    if not check:
        return mode2d.sample(s_nodes, rho_nodes, rho_max), None
    fine_s = 2 * s_nodes if mode2d.mode1d.periodic else 2 * s_nodes - 1
    fine = mode2d.sample(fine_s, 2 * rho_nodes - 1, rho_max)
    base = type(fine)(fine.s[::2], fine.rho[::2], fine.values[::2, ::2], fine.periodic)
    return base, fine


def _h_residual(c, scale, spectral, grid):
    E, h, eps = spectral.curly_E2, scale.h, scale.epsilon
    W, s, rho = grid.values, grid.s, grid.rho
    V = c.V(s, E)[:, None]
    A3 = c.A3(s, E)[:, None]
    res = (-eps**2 * fd_d2(W, grid.ds, 0, grid.periodic) + V * W
           + h * (-fd_d2(W, grid.drho, 1, wall=True) + rho[None, :] * A3 * W))
    return _l2(res, grid.ds, grid.drho)


def _grid_spec(grid):
    return {"s_nodes": len(grid.s), "rho_nodes": len(grid.rho), "ds": grid.ds,
            "drho": grid.drho, "rho_max": float(grid.rho[-1]), "periodic": grid.periodic}


def apply_h_2d(curve, scale, spectral, mode2d, s_nodes=S_NODES, rho_nodes=RHO_NODES, rho_max=None,
               check=True):
    """Residual ``||H w||`` with ``H = p_s^2 + V + h(-d_rho^2 + rho A^3)`` over the half-strip."""
    c = longitudinal_coefficients(curve, scale)
    base, fine = _grids(mode2d, s_nodes, rho_nodes, rho_max, check)
    r0 = _h_residual(c, scale, spectral, base)
    r1 = None if fine is None else _h_residual(c, scale, spectral, fine)
    return _finish(OperatorId.H_2D, scale.h, _grid_spec(base), r0, r1)


def _delta2_residual(curve, scale, spectral, grid):
    E, h, eps = spectral.curly_E2, scale.h, scale.epsilon
    W, s, rho = grid.values, grid.s, grid.rho
    chart = eval_chart(curve, h * rho[None, :], s[:, None])
    ok = chart.h_s > 0
    hs = np.where(ok, chart.h_s, 1.0)
    metric = np.where(ok, hs**-2, 0.0)
    pot = np.where(ok, scale.a_n**2 / np.where(ok, chart.X, 1.0) ** 2 - E, 0.0)
    per = grid.periodic
    res = (-h * fd_d2(W, grid.drho, 1, wall=True)
           - eps**2 * fd_d1(metric * fd_d1(W, grid.ds, 0, per), grid.ds, 0, per)
           + pot * W)
    return _l2(res, grid.ds, grid.drho)


def apply_delta2(curve, scale, spectral, mode2d_localized, s_nodes=S_NODES, rho_nodes=RHO_NODES,
                 rho_max=None, check=True):
    """Residual of ``Delta_2 - curlyE2`` on the cut-off field, in the stretched variable.

    ``-eps^2 d_r^2 = -h d_rho^2`` for ``r = h rho``, and the s-part is kept in
    divergence form ``p_s (1 - r k)^-2 p_s``. The norm is that of ``L2(d rho ds)``,
    in which the field is normalized.
    """
    if not mode2d_localized.localized:
        raise LocalizationError("apply the radial cutoff before measuring the Delta_2 residual")
    base, fine = _grids(mode2d_localized, s_nodes, rho_nodes, rho_max, check)
    r0 = _delta2_residual(curve, scale, spectral, base)
    r1 = None if fine is None else _delta2_residual(curve, scale, spectral, fine)
    spec = _grid_spec(base)
    spec["C_loc"] = mode2d_localized.C_loc
    spec["cutoff_norm_change"] = mode2d_localized.norm_change
    return _finish(OperatorId.DELTA2_2D, scale.h, spec, r0, r1)


# ---------------------------------------------------------------------------
# scaling

def fit_scaling(pairs, operator_id=None):
    """Fit ``log y = p log x + b`` to at least four ``(x, y)`` pairs.

    ``monotone`` records whether ``y`` strictly decreases with decreasing ``x``.
    """
    pairs = tuple(sorted((float(x), float(y)) for x, y in pairs))
    if len(pairs) < 4:
        raise DomainError("a scaling fit needs at least 4 points")
    x, y = np.array(pairs).T
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("scaling fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(pairs, float(slope), r2, float(intercept), bool(np.all(np.diff(y) > 0)), operator_id)


def quasimode_order(delta2_reports, spectra, epsilons):
    """Fit ``residual / lambda^2`` against ``lambda`` for the 3-D quasimodes.

    With ``u`` normalized as ``w~``, ``||(-Delta - lambda^2) u|| = eps^-2 ||(Delta_2 - curlyE2) w~||``
    and ``lambda^2 = curlyE2 / eps^2``, so the ratio is ``||(Delta_2 - curlyE2) w~|| / curlyE2``.
    A quasimode of order ``nu`` gives slope ``-nu``.
    """
    pairs = []
    for rep, sp, eps in zip(delta2_reports, spectra, epsilons):
        lam = math.sqrt(sp.curly_E2) / eps
        pairs.append((lam, rep.l2_norm / sp.curly_E2))
    return fit_scaling(pairs, OperatorId.LAPLACE3D_ORDER)


@dataclass
class SweepResult:
    """Reports and fits of an h-sweep at fixed ``a_n``."""

    h_values: list
    spectra: list = field(default_factory=list)
    reports: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "h_values": list(self.h_values),
            "spectra": [s.to_dict() for s in self.spectra],
            "reports": {k: [r.to_dict() for r in v] for k, v in self.reports.items()},
            "fits": {k: f.to_dict() for k, f in self.fits.items()},
        }


def sweep_c_loc(h, C_loc=DEFAULT_C_LOC, margin=0.9):
    """Cutoff constant for the sweep: ``C_loc`` capped below the focal limit ``1/sqrt(h)``."""
    return min(C_loc, margin / math.sqrt(h))


def residual_sweep(curve, a_n, k, m, h_values, C_loc=DEFAULT_C_LOC, operators=("L0_1d", "H_2d", "Delta2_2d"),
                   s_nodes=S_NODES, rho_nodes=RHO_NODES, check=False):
    """Residuals over ``h`` with ``eps = h^{3/2}`` and ``n = round(a_n / eps)``.

    The cutoff is applied non-strictly with ``sweep_c_loc`` so that large ``h``
    still produce a field; the recorded norm change shows when localization
    breaks down.
    """
    out = SweepResult(sorted(h_values, reverse=True))
    ops = [OperatorId(o) for o in operators]
    for op in ops:
        out.reports[op.value] = []
    eps_list = []
    for h in out.h_values:
        eps = h**1.5
        scale = ScaleParams(eps, int(round(a_n / eps)))
        sp = assemble_spectrum(curve, scale, ModeIndices(scale.n, k, m))
        psi = longitudinal_mode(curve, scale, sp)
        out.spectra.append(sp)
        eps_list.append(eps)
        if OperatorId.L0_1D in ops:
            out.reports["L0_1d"].append(apply_l0(curve, scale, sp, psi, check=check))
        if OperatorId.H_2D in ops or OperatorId.DELTA2_2D in ops:
            w = build_mode2d(curve, scale, sp, psi)
            grid = {"s_nodes": s_nodes, "rho_nodes": rho_nodes, "check": check}
            if OperatorId.H_2D in ops:
                out.reports["H_2d"].append(apply_h_2d(curve, scale, sp, w, **grid))
            if OperatorId.DELTA2_2D in ops:
                wt = cutoff_localize(w, sweep_c_loc(h, C_loc), strict=False,
                                     s_nodes=s_nodes, rho_nodes=rho_nodes)
                out.reports["Delta2_2d"].append(apply_delta2(curve, scale, sp, wt, **grid))
        log.info("sweep h=%g done", h)
    for key, reps in out.reports.items():
        out.fits[key] = fit_scaling([(r.h, r.l2_norm) for r in reps], OperatorId(key))
    if OperatorId.DELTA2_2D in ops:
        out.fits["Laplace3d_order"] = quasimode_order(out.reports["Delta2_2d"], out.spectra, eps_list)
    return out


# ---------------------------------------------------------------------------
# eigenvalue oracle

def _periodic_d2_matrix(n, ds):
    stencil = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * ds**2)
    col = np.zeros(n)
    for off, v in zip(range(-2, 3), stencil):
        col[off % n] += v
    return linalg.circulant(col)


def _frozen_a2(c, s, E2):
    # signed cube root: A^3 may be negative far inside the forbidden region,
    # where the mode is exponentially small
    return np.cbrt(c.A3(s, E2)) ** 2


def _oracle_matrix(c, scale, t_k, E2_frozen, nodes):
    s = np.arange(nodes) * (c.L / nodes)
    M = -scale.epsilon**2 * _periodic_d2_matrix(nodes, c.L / nodes)
    M[np.diag_indices(nodes)] += c.U(s) + scale.h * t_k * _frozen_a2(c, s, E2_frozen)
    return M


def _inverse_iteration(M, shift, tol, max_iter):
    n = M.shape[0]
    lu = linalg.lu_factor(M - shift * np.eye(n), check_finite=False)
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    mu = shift
    for it in range(1, max_iter + 1):
        v = linalg.lu_solve(lu, v, check_finite=False)
        v /= np.linalg.norm(v)
        new = float(v @ M @ v)
        if abs(new - mu) <= tol * abs(new) and np.linalg.norm(M @ v - new * v) <= 1e3 * tol * abs(new):
            return new, v
        mu = new
    raise OracleError(f"inverse iteration did not converge in {max_iter} steps (last {mu:.12g})")


def _count_below(M, x):
    """Number of eigenvalues of the symmetric ``M`` below ``x`` (Sylvester inertia)."""
    _, d, _ = linalg.ldl(M - x * np.eye(M.shape[0]), check_finite=False)
    return int(np.sum(np.linalg.eigvalsh(d) < 0))


def _solve_level(M, shift, level, tol, max_iter):
    """Inverse iteration near ``shift``; if ``level`` is given, make sure the
    result is the eigenvalue with exactly ``level`` eigenvalues below it."""
    # nudge the shift off a possibly exact eigenvalue
    mu, v = _inverse_iteration(M, shift * (1 + 1e-10), tol, max_iter)
    if level is None:
        return mu, v
    below = _count_below(M, mu - 1e-9 * abs(mu))
    if below != level:
        log.info("nearest eigenvalue is level %d, retargeting level %d", below, level)
        target = linalg.eigh(M, eigvals_only=True, subset_by_index=(level, level))[0]
        mu, v = _inverse_iteration(M, target * (1 + 1e-10), tol, max_iter)
        below = _count_below(M, mu - 1e-9 * abs(mu))
        if below != level:
            raise OracleError(f"oracle converged to level {below}, expected {level}")
    return mu, v


def fd_oracle_1d(curve, scale, indices, spectral_guess, nodes=ORACLE_NODES, tol=1e-13, max_iter=500):
    """Eigenvalue of the periodic 1-D problem nearest the asymptotic ``curlyE2``.

    The operator ``-eps^2 d^2/ds^2 + U + h t_k A^2(s; E2)`` is discretized with
    4th-order central differences on ``nodes`` points over one period, with
    ``A^2`` frozen at ``spectral_guess.E2``. The eigenvalue nearest
    ``spectral_guess.curly_E2`` is found by shifted inverse iteration, then
    ``A^2`` is refrozen at that eigenvalue and the iteration repeated once,
    shifted to the refreshed Rayleigh quotient of the first eigenvector so
    that it follows the same level. Between two turning points the level is
    identified by counting eigenvalues below it (Sylvester inertia); if the
    nearest eigenvalue is not level ``m`` the shift is moved to level ``m``.
    """
    if nodes < 2000:
        raise DomainError("the oracle needs at least 2000 nodes")
    if indices.k != spectral_guess.k or indices.m != spectral_guess.m:
        raise DomainError("indices do not match the spectral guess")
    c = longitudinal_coefficients(curve, scale)
    t = spectral_guess.t_k
    level = indices.m if spectral_guess.regime is Regime.TWO_TURNING else None
    M = _oracle_matrix(c, scale, t, spectral_guess.E2, nodes)
    mu, v = _solve_level(M, spectral_guess.curly_E2, level, tol, max_iter)
    M = _oracle_matrix(c, scale, t, mu, nodes)
    # follow the same level: the refreshed Rayleigh quotient is first-order accurate
    mu, _ = _solve_level(M, float(v @ M @ v), level, tol, max_iter)
    return mu


def fd_level(curve, scale, t_k, E2_frozen, level, nodes=ORACLE_NODES, tol=1e-13, max_iter=500):
    """Eigenvalue number ``level`` (from the bottom) of the frozen-coefficient
    FD operator, found by inverse iteration and checked by inertia."""
    c = longitudinal_coefficients(curve, scale)
    M = _oracle_matrix(c, scale, t_k, E2_frozen, nodes)
    target = linalg.eigh(M, eigvals_only=True, subset_by_index=(level, level))[0]
    return _solve_level(M, target, level, tol, max_iter)[0]


def fd_spectrum_1d(curve, scale, t_k, E2_frozen, nodes=512, count=None):
    """Sorted eigenvalues of the frozen-coefficient periodic FD operator (coarse scan)."""
    c = longitudinal_coefficients(curve, scale)
    M = _oracle_matrix(c, scale, t_k, E2_frozen, nodes)
    M = 0.5 * (M + M.T)
    sel = None if count is None else (0, count - 1)
    return linalg.eigh(M, eigvals_only=True, subset_by_index=sel)


# ---------------------------------------------------------------------------
# audits

@dataclass(frozen=True)
class AuditCheck:
    name: str
    value: float
    tol: float
    passed: bool


@dataclass(frozen=True)
class AuditReport:
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_dict(self):
        return {"passed": self.passed,
                "checks": [{"name": c.name, "value": c.value, "tol": c.tol, "passed": c.passed}
                           for c in self.checks]}


def audit_normalizations(mode1d, mode2d, mode3d=None, partner=None, s_samples=33, raise_on_failure=True):
    """Check the normalizations of ``psi``, ``w``, the transverse factor and, if
    ``partner`` is given, the orthogonality ``<mode3d, partner>``.

    Checks run in that order; with ``raise_on_failure`` the first violation
    raises ``AuditError`` naming the check.
    """
    h = mode2d.h
    checks = []

    def record(name, value, tol):
        ok = bool(value <= tol)
        checks.append(AuditCheck(name, float(value), tol, ok))
        if raise_on_failure and not ok:
            raise AuditError(name, f"{value:.3e} exceeds {tol:g}")

    record("psi_norm", abs(mode1d.norm() - 1.0), 1e-8)
    record("w_norm", abs(mode2d.sample().norm() - 1.0), 5 * h)
    a, b = mode2d.s_window()
    s = np.linspace(a, b, s_samples + 2)[1:-1]
    A, _ = mode2d.stability(s)
    record("chi0_normalization", float(np.max(np.abs(transverse_normalization(A, mode2d.spectral.t_k) - 1.0))), 1e-6)
    if partner is not None:
        if mode3d is None:
            raise DomainError("orthogonality needs mode3d and its partner")
        record("orthogonality", abs(inner_product_3d(mode3d, partner)), 1e-10)
    return AuditReport(tuple(checks))
