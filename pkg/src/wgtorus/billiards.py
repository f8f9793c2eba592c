"""Classical dynamics behind the quasimodes: the reduced 2-D Hamiltonian flow
with a reflecting wall at rho = 0, ray billiards in the solid torus, and the
action variable of the longitudinal motion."""

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy.optimize import brentq

from .exceptions import DomainError, GeometryError, GrazingWarning, IntegrationError, RegimeError
from .geometry import _project
from .semiclassics import Regime, allowed_action, longitudinal_coefficients, turning_points

__all__ = [
    "PhaseState2D",
    "Trajectory2D",
    "Hamiltonian2D",
    "flow_2d",
    "default_dt",
    "wall_launch",
    "excursion_maxima",
    "Ray3D",
    "billiard_3d",
    "ActionValue",
    "action_of_energy",
]

MAX_HALVINGS = 10
STEP_TOL = 1e-8
# relative drift is measured against max(|H0|, ENERGY_FLOOR * curlyE2):
# at quantized energies H0 itself is ~0
ENERGY_FLOOR = 1e-2


@dataclass(frozen=True)
class PhaseState2D:
    s: float
    p_s: float
    rho: float
    p_rho: float
    energy: float
    t: float = 0.0

    def __post_init__(self):
        if self.rho < 0:
            raise DomainError("rho must be nonnegative")


class Hamiltonian2D:
    """``H = p_s^2 + V(s) + h (p_rho^2 + rho A^3(s))`` at the spectral parameter ``curlyE2``."""

    def __init__(self, curve, scale, spectral, h=None):
        self.c = longitudinal_coefficients(curve, scale)
        self.E = spectral.curly_E2
        self.h = scale.h if h is None else float(h)
        self.L = self.c.L

    def local(self, s):
        """``(V, V', A^3, dA^3/ds)`` at ``s``."""
        c, E = self.c, self.E
        s = s % self.L
        k = float(c.kappa(s))
        return (float(c.U(s)) - E, float(c.dU(s)), float(c.B(s)) + 2.0 * k * E,
                float(c.dB(s)) + 2.0 * float(c.dkappa(s)) * E)

    def a3(self, s):
        return float(self.c.A3(s, self.E))

    def h0(self, s, p_s):
        return p_s * p_s + float(self.c.V(s, self.E))

    def __call__(self, s, p_s, rho, p_rho, loc=None):
        V, _, a3, _ = self.local(s) if loc is None else loc
        return p_s * p_s + V + self.h * (p_rho * p_rho + rho * a3)

    def state(self, s, p_s, rho, p_rho, t=0.0, loc=None):
        return PhaseState2D(float(s) % self.L, float(p_s), float(rho), float(p_rho),
                            self(s, p_s, rho, p_rho, loc), float(t))

    def forces(self, rho, loc):
        """``(-dH/ds, -dH/drho)`` from the local coefficients."""
        _, dV, a3, da3 = loc
        return -dV - self.h * rho * da3, -self.h * a3


@dataclass
class Trajectory2D:
    """Recorded states of a 2-D flow with its reflection count and energy drift."""

    states: list
    dt: float
    reflections: int = 0
    max_drift: float = 0.0
    energy_scale: float = 1.0
    halvings: int = 0

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def arrays(self):
        """Columns ``t, s, p_s, rho, p_rho, H`` as one array."""
        return np.array([(x.t, x.s, x.p_s, x.rho, x.p_rho, x.energy) for x in self.states])


def default_dt(curve, scale, spectral, samples=4096):
    """``1e-3 min(1, 1 / max |V'|)``."""
    c = longitudinal_coefficients(curve, scale)
    s = np.linspace(0.0, c.L, samples, endpoint=False)
    return 1e-3 * min(1.0, 1.0 / float(np.max(np.abs(c.dU(s)))))


def _step(ham, s, p_s, rho, p_rho, dt, loc, land=False):
    """Plain kick-drift-kick step; ``land`` puts ``rho`` exactly on the wall."""
    fs, fr = ham.forces(rho, loc)
    p_s += 0.5 * dt * fs
    p_rho += 0.5 * dt * fr
    s += dt * 2.0 * p_s
    rho = 0.0 if land else rho + dt * 2.0 * ham.h * p_rho
    loc = ham.local(s)
    fs, fr = ham.forces(rho, loc)
    p_s += 0.5 * dt * fs
    p_rho += 0.5 * dt * fr
    return s, p_s, rho, p_rho, loc


def _wall_time(ham, rho, p_rho, dt, loc, tol=1e-12):
    """Sub-step ``tau`` whose Verlet step ends on ``rho = 0``, by bisection."""
    fr = ham.forces(rho, loc)[1]
    end = lambda tau: rho + 2.0 * ham.h * tau * (p_rho + 0.5 * tau * fr)
    lo, hi = 0.0, dt
    while hi - lo > tol * dt:
        mid = 0.5 * (lo + hi)
        if end(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _verlet(ham, s, p_s, rho, p_rho, dt, loc):
    """One Störmer-Verlet step with elastic reflection at ``rho = 0``.

    If the step would cross the wall, it is split at the crossing time: a
    Verlet step to the wall, the reflection ``p_rho -> -p_rho`` (which keeps
    ``H`` since it is even in ``p_rho``), and a Verlet step for the rest.
    ``loc`` holds the coefficients at ``s``; the one for the new position is
    returned so each position is evaluated once.
    """
    fr = ham.forces(rho, loc)[1]
    if rho + dt * 2.0 * ham.h * (p_rho + 0.5 * dt * fr) >= 0.0:
        return (*_step(ham, s, p_s, rho, p_rho, dt, loc), 0)
    tau = _wall_time(ham, rho, p_rho, dt, loc)
    s, p_s, rho, p_rho, loc = _step(ham, s, p_s, rho, p_rho, tau, loc, land=True)
    p_rho = -p_rho
    s, p_s, rho, p_rho, loc = _step(ham, s, p_s, rho, p_rho, dt - tau, loc)
    return s, p_s, max(rho, 0.0), p_rho, loc, 1


def flow_2d(curve, scale, spectral, state0, T, dt=None, stride=1, h=None, step_tol=STEP_TOL):
    """Integrate the reduced Hamiltonian system with a reflecting wall at ``rho = 0``.

    Störmer-Verlet (kick-drift-kick) with fixed step; a step whose energy
    change exceeds ``step_tol`` times the energy scale is redone with half
    steps, up to 10 halvings. The energy scale is ``|H|`` at the start,
    floored at ``1e-2 curlyE2`` because quantized launches have ``H = 0``.

    Parameters
    ----------
    state0 : PhaseState2D
    T : float
        Final time.
    dt : float, optional
        Step; defaults to :func:`default_dt`.
    stride : int
        Record every ``stride``-th step (the final state is always recorded).
    h : float, optional
        Override of the coupling ``h`` (``h = 0`` freezes ``rho, p_rho``).
    step_tol : float
        Per-step relative energy tolerance.

    Returns
    -------
    Trajectory2D
    """
    if not T > 0:
        raise DomainError("T must be positive")
    ham = Hamiltonian2D(curve, scale, spectral, h)
    dt = default_dt(curve, scale, spectral) if dt is None else float(dt)
    if not dt > 0:
        raise DomainError("dt must be positive")
    steps = int(math.ceil(T / dt - 1e-9))
    dt = T / steps
    s, p_s, rho, p_rho = state0.s, state0.p_s, state0.rho, state0.p_rho
    loc = ham.local(s)
    H0 = ham(s, p_s, rho, p_rho, loc)
    scale_e = max(abs(H0), ENERGY_FLOOR * spectral.curly_E2)
    traj = Trajectory2D([ham.state(s, p_s, rho, p_rho, 0.0, loc)], dt, energy_scale=scale_e)
    H = H0
    start = 0
    for i in range(1, steps + 1):
        # resume near the last accepted refinement instead of from scratch
        for level in range(start, MAX_HALVINGS + 1):
            sub = 2**level
            ns, nps, nr, npr, nloc, hits = s, p_s, rho, p_rho, loc, 0
            for _ in range(sub):
                ns, nps, nr, npr, nloc, k = _verlet(ham, ns, nps, nr, npr, dt / sub, nloc)
                hits += k
            Hn = ham(ns, nps, nr, npr, nloc)
            if abs(Hn - H) <= step_tol * scale_e:
                break
        else:
            raise IntegrationError(f"energy step error {abs(Hn - H):.3e} after {MAX_HALVINGS} halvings at t = {i * dt:.6g}")
        traj.halvings = max(traj.halvings, level)
        start = max(level - 1, 0)
        s, p_s, rho, p_rho, loc, H = ns, nps, nr, npr, nloc, Hn
        traj.reflections += hits
        traj.max_drift = max(traj.max_drift, abs(H - H0) / scale_e)
        if i % stride == 0 or i == steps:
            traj.states.append(ham.state(s, p_s, rho, p_rho, i * dt, loc))
    return traj


def wall_launch(curve, scale, spectral, s0, p_rho=None, h=None):
    """State on the wall at ``s0`` with ``H = 0``.

    The default ``p_rho = sqrt(t_k) A(s0)`` gives the transverse energy
    ``t_k A^2`` of the Airy level, whose turning point is the caustic.
    """
    ham = Hamiltonian2D(curve, scale, spectral, h)
    if p_rho is None:
        a3 = ham.a3(s0)
        if a3 <= 0:
            raise RegimeError(f"stability condition fails at s = {s0:.6g}; no Airy level to launch")
        p_rho = math.sqrt(spectral.t_k) * a3 ** (1.0 / 3.0)
    ps2 = -ham.h0(s0, 0.0) - ham.h * p_rho**2
    if ps2 < 0:
        raise RegimeError(f"no zero-energy state on the wall at s = {s0:.6g}")
    return ham.state(s0, math.sqrt(ps2), 0.0, p_rho)


def excursion_maxima(traj):
    """``(s, rho_max)`` of each completed excursion between two wall reflections.

    Between reflections ``p_rho`` decreases monotonically, so a sign change
    from negative to positive between records marks a reflection.
    """
    out = []
    first = traj.states[0]
    # a launch from the wall starts an excursion too
    cur = (first.s, first.rho) if first.rho == 0 and first.p_rho > 0 else None
    for prev, st in zip(traj.states, traj.states[1:]):
        if st.p_rho > 0 >= prev.p_rho:
            if cur is not None:
                out.append(cur)
            cur = (st.s, st.rho)
        elif cur is not None and st.rho > cur[1]:
            cur = (st.s, st.rho)
    return out


# ---------------------------------------------------------------------------
# 3-D billiard

@dataclass(frozen=True)
class Ray3D:
    """A straight segment of a billiard path; ``segment_length`` is the distance to the wall."""

    origin: np.ndarray
    direction: np.ndarray
    segment_length: float = math.inf

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-14:
            raise DomainError("ray direction must be a unit vector")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "direction", d)

    def point(self, t):
        return self.origin + t * self.direction

    @property
    def end(self):
        return self.point(self.segment_length)

    @property
    def angular_momentum(self):
        """z-component of ``x cross d``."""
        (x, y, _), (dx, dy, _) = self.origin, self.direction
        return x * dy - y * dx


def _depth(curve, p):
    """Signed distance to the wall in the meridian plane (positive inside) for
    points ``p`` of shape ``(..., 3)``.

    Newton projection is exact near the wall; beyond the focal distance it
    cannot converge, and such points are deep inside.
    """
    p = np.asarray(p, dtype=float)
    xi = np.hypot(p[..., 0], p[..., 1])
    r, _, ok = _project(curve, xi, p[..., 2])
    return np.where(ok, r, 1.0 / curve.max_curvature())


def _outward_normal(curve, p):
    xi = math.hypot(p[0], p[1])
    _, s, _ = _project(curve, np.array([xi]), np.array([p[2]]))
    nx, nz = curve.inner_normal(s[0])
    alpha = math.atan2(p[0], p[1])
    n = -np.array([nx * math.sin(alpha), nx * math.cos(alpha), nz])
    return n / np.linalg.norm(n)


def _next_hit(curve, origin, d, step, limit, chunk=256):
    g = lambda t: float(_depth(curve, origin + t * d))
    # start clear of the wall the ray leaves from
    lo = min(1e-9, step)
    if g(lo) <= 0:
        raise GeometryError("ray leaves the domain immediately (grazing or outward direction)")
    t0 = lo
    while t0 < limit:
        ts = t0 + step * np.arange(1, chunk + 1)
        vals = _depth(curve, origin + ts[:, None] * d)
        out = np.flatnonzero(vals < 0)
        if out.size:
            k = out[0]
            a = ts[k - 1] if k else t0
            return brentq(g, a, ts[k], xtol=1e-15, rtol=1e-15)
        t0 = ts[-1]
    raise GeometryError(f"no wall intersection within {limit:.3g}")


def billiard_3d(curve, ray0, bounces):
    """Follow a billiard ray in the solid torus for ``bounces`` reflections.

    Each segment ends where the signed wall distance along the ray changes
    sign, bracketed with steps of ``diameter/200`` and refined by Brent's
    method; the direction is reflected about the wall normal at the hit.

    Returns
    -------
    list of Ray3D
        One segment per bounce, starting at ``ray0.origin``.
    """
    if bounces < 1:
        raise DomainError("bounces must be a positive integer")
    if float(_depth(curve, ray0.origin)) < 0:
        raise DomainError("ray origin lies outside the domain")
    diam = curve.diameter()
    step = diam / 200.0
    limit = 10.0 * diam
    origin, d = ray0.origin.copy(), ray0.direction.copy()
    out = []
    for _ in range(bounces):
        t = _next_hit(curve, origin, d, step, limit)
        out.append(Ray3D(origin, d, t))
        hit = origin + t * d
        n = _outward_normal(curve, hit)
        cos_inc = float(d @ n)
        if abs(cos_inc) < 1e-10:
            warnings.warn(f"grazing incidence (cos = {cos_inc:.2e})", GrazingWarning, stacklevel=2)
        d = d - 2.0 * cos_inc * n
        d /= np.linalg.norm(d)
        origin = hit
    return out


# ---------------------------------------------------------------------------
# action

@dataclass(frozen=True)
class ActionValue:
    E2: float
    I: float

    def __post_init__(self):
        if not self.I > 0:
            raise DomainError("action must be positive")


def action_of_energy(curve, scale, E2):
    """Action of the longitudinal motion, ``I = (1/pi) int_{s-}^{s+} sqrt(E2 - U) ds``."""
    regime, s_minus, s_plus = turning_points(curve, scale, E2)
    if regime is not Regime.TWO_TURNING:
        raise RegimeError("the action variable is defined between two turning points")
    return ActionValue(float(E2), allowed_action(curve, scale, E2, s_minus, s_plus) / math.pi)
