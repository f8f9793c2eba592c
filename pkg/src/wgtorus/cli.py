"""Command-line front end: ``wgtorus <subcommand> --config <path> [--out <dir>] [--h-sweep ...]``.

Exit codes: 0 success, 2 configuration error, 3 numerical or regime error,
4 audit failure. Stages run in order and keep whatever they wrote before an
error.
"""

import argparse
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .artifacts import write_csv, write_json, write_svg_field
from .billiards import (
    Hamiltonian2D,
    Ray3D,
    _depth,
    action_of_energy,
    billiard_3d,
    default_dt,
    flow_2d,
    wall_launch,
)
from .config import parse_config
from .exceptions import AuditError, ConfigError, WGError
from .modes import build_mode2d, build_mode3d, caustic_curve, cutoff_localize, longitudinal_mode
from .semiclassics import Regime, ScaleParams, assemble_spectrum, longitudinal_coefficients
from .verify import (
    apply_delta2,
    apply_h_2d,
    apply_l0,
    audit_normalizations,
    fd_oracle_1d,
    residual_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_AUDIT = 0, 2, 3, 4
STAGES = ("curve", "spectrum", "mode1d", "mode2d", "mode3d", "residual", "oracle",
          "billiard2d", "billiard3d", "caustic")
# thresholds printed next to the measured values
ORDER_TARGETS = {"L0_1d": 1.7, "H_2d": 1.7, "Delta2_2d": 1.6}
QUASIMODE_ORDER, QUASIMODE_TOL = -4.0 / 3.0, 0.2
DRIFT_TOL = 1e-7
EXPORT_S, EXPORT_RHO = 256, 128


class Pipeline:
    """Lazily built chain of pipeline objects shared between stages."""

    def __init__(self, config, out, h_sweep=None):
        self.config = config
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.h_sweep = h_sweep
        self.hash = config.config_hash()
        self._cache = {}
        self.summary = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def curve(self):
        return self._get("curve", self.config.curve)

    @property
    def scale(self):
        return self.config.scale_params()

    def spectral_for(self, scale):
        regime = self.config.mode.regime
        regime = None if regime == "auto" else Regime(regime)
        return assemble_spectrum(self.curve, scale, self.config.indices(scale.n), regime)

    @property
    def spectral(self):
        return self._get("spectral", lambda: self.spectral_for(self.scale))

    def mode1d_for(self, scale, spectral):
        m = self.config.mode
        return longitudinal_mode(self.curve, scale, spectral, delta=m.delta, ell=m.ell)

    @property
    def mode1d(self):
        return self._get("mode1d", lambda: self.mode1d_for(self.scale, self.spectral))

    def mode2d_for(self, scale, spectral, mode1d):
        return build_mode2d(self.curve, scale, spectral, mode1d)

    @property
    def mode2d(self):
        return self._get("mode2d", lambda: self.mode2d_for(self.scale, self.spectral, self.mode1d))

    @property
    def rho_max(self):
        return self.config.grid.rho_max_factor * self.mode2d.default_rho_max()

    @property
    def grid(self):
        g = self.config.grid
        return {"s_nodes": g.s_nodes, "rho_nodes": g.rho_nodes, "rho_max": self.rho_max}

    def localize(self, mode2d, rho_max):
        g = self.config.grid
        return cutoff_localize(mode2d, self.config.mode.C_loc, s_nodes=g.s_nodes, rho_nodes=g.rho_nodes,
                               rho_max=rho_max)

    @property
    def localized(self):
        return self._get("localized", lambda: self.localize(self.mode2d, self.rho_max))

    def csv(self, name, columns):
        return write_csv(self.out / name, columns, self.hash)

    def json(self, name, data):
        return write_json(self.out / name, data, self.hash)


def _flag(ok):
    return "PASS" if ok else "FAIL"


def stage_curve(p):
    c = p.curve
    s = c.s_nodes[:-1]
    x, z = c.point(s)
    p.csv("curve.csv", {"s": s, "x": x, "z": z, "k": c.kappa(s)})
    p.summary.update(L=c.L, closure_error=c.closure_error, a_n_over_R=p.scale.a_n / c.R)
    return (f"L={c.L:.6f} closure={c.closure_error:.2e} turning={c.total_turning:.6f} "
            f"max_k={c.max_curvature():.4f} a_n/R={p.scale.a_n / c.R:.4f}")


def stage_spectrum(p):
    sp = p.spectral
    d = sp.to_dict()
    d.update(a_n=p.scale.a_n, a_n_over_R=p.scale.a_n / p.curve.R, correction=sp.correction)
    if sp.regime is Regime.TWO_TURNING:
        d["action_over_eps"] = action_of_energy(p.curve, p.scale, sp.E2).I / p.scale.epsilon
    p.json("spectrum.json", d)
    p.summary.update({k: d[k] for k in ("t_k", "s_minus", "s_plus", "E2", "correction", "curlyE2", "a_n_over_R")})
    turn = "" if sp.s_minus is None else f" s-={sp.s_minus:.4f} s+={sp.s_plus:.4f}"
    return (f"regime={sp.regime.value} t_k={sp.t_k:.4f}{turn} E2={sp.E2:.5f} "
            f"h*t_k*E1={sp.correction:.5f} curlyE2={sp.curly_E2:.6f}")


def stage_mode1d(p):
    mode = p.mode1d
    L = p.curve.L
    s = np.arange(p.config.grid.s_nodes) * (L / p.config.grid.s_nodes)
    psi = mode(s)
    p.csv("mode1d.csv", {"s": s, "re_psi": psi.real, "im_psi": psi.imag, "abs_psi": np.abs(psi)})
    rep = apply_l0(p.curve, p.scale, p.spectral, mode)
    p.json("residual_l0.json", rep.to_dict())
    norm = mode.norm()
    p.summary.update(psi_norm=norm, l0_residual=rep.l2_norm)
    return f"kind={mode.kind} |psi|={norm:.10f} ||L0 psi||={rep.l2_norm:.4e} converged={rep.converged}"


def _export_field(p, name, field):
    i = np.unique(np.linspace(0, len(field.s) - 1, min(EXPORT_S, len(field.s))).astype(int))
    j = np.unique(np.linspace(0, len(field.rho) - 1, min(EXPORT_RHO, len(field.rho))).astype(int))
    S, Rh = np.meshgrid(field.s[i], field.rho[j], indexing="ij")
    W = field.values[np.ix_(i, j)]
    p.csv(name, {"s": S, "rho": Rh, "re_w": W.real, "im_w": W.imag, "abs_w": np.abs(W)})


def stage_mode2d(p):
    mode, loc = p.mode2d, p.localized
    grid = p.grid
    field = loc.sample(**grid)
    _export_field(p, "mode2d.csv", field)
    caustic = caustic_curve(p.curve, p.scale, p.spectral)
    if "svg" in p.config.output.formats:
        write_svg_field(p.out / "mode2d.svg", field.s, field.rho, field.values, p.hash,
                        overlay=(field.s, caustic.rho_c(field.s)))
    h_rep = apply_h_2d(p.curve, p.scale, p.spectral, mode, **grid)
    d_rep = apply_delta2(p.curve, p.scale, p.spectral, loc, **grid)
    p.json("residual_2d.json", {"H_2d": h_rep.to_dict(), "Delta2_2d": d_rep.to_dict(),
                                "C_loc": loc.C_loc, "cutoff_norm_change": loc.norm_change})
    lam2 = p.spectral.curly_E2
    p.summary.update(w_norm=field.norm(), h_residual=h_rep.l2_norm, delta2_residual=d_rep.l2_norm,
                     quasimode_ratio=d_rep.l2_norm / lam2)
    return (f"|w~|={field.norm():.6f} cutoff_change={loc.norm_change:.2e} ||H w||={h_rep.l2_norm:.4e} "
            f"||(D2-E2) w~||={d_rep.l2_norm:.4e}")


def stage_mode3d(p):
    curve, cfg = p.curve, p.config
    u = build_mode3d(curve, p.localized, cfg.scale.n)
    # orthogonality partner: the same chain at n + 1
    scale2 = ScaleParams(p.scale.epsilon, cfg.scale.n + 1)
    spec2 = p.spectral_for(scale2)
    mode2 = p.mode2d_for(scale2, spec2, p.mode1d_for(scale2, spec2))
    partner = build_mode3d(curve, p.localize(mode2, p.rho_max), scale2.n)
    report = audit_normalizations(p.mode1d, p.localized, u, partner, raise_on_failure=False)
    p.json("audit.json", report.to_dict())
    # meridian slice at alpha = 0, i.e. the half-plane x = 0, y > 0
    n = cfg.grid.section_nodes
    xs, zs = curve.q1_nodes + curve.R, curve.q2_nodes
    xi = np.linspace(xs.min(), xs.max(), n)
    z = np.linspace(zs.min(), zs.max(), n)
    XI, Z = np.meshgrid(xi, z, indexing="ij")
    vals = u(np.zeros_like(XI), XI, Z)
    p.csv("mode3d_slice.csv", {"x": XI, "z": Z, "abs_u": np.abs(vals)})
    p.summary.update(audit={c.name: c.value for c in report.checks})
    line = " ".join(f"{c.name}={c.value:.2e}[{_flag(c.passed)}]" for c in report.checks)
    if not report.passed:
        raise AuditError(report.failures()[0].name, line)
    return line


def stage_residual(p):
    cfg = p.config
    hs = p.h_sweep or list(cfg.sweep.h)
    g = cfg.grid
    sweep = residual_sweep(p.curve, p.scale.a_n, cfg.mode.k, cfg.mode.m, hs, C_loc=cfg.mode.C_loc,
                           s_nodes=g.s_nodes, rho_nodes=g.rho_nodes)
    qm = sweep.fits["Laplace3d_order"]
    p.json("residual.json", sweep.to_dict())
    parts = []
    for op, target in ORDER_TARGETS.items():
        f = sweep.fits[op]
        ok = f.fitted_order >= target and (op != "L0_1d" or f.r_squared >= 0.98)
        parts.append(f"{op}={f.fitted_order:.3f}(r2={f.r_squared:.3f})[{_flag(ok)}]")
        p.summary[f"order_{op}"] = f.fitted_order
    ok = abs(qm.fitted_order - QUASIMODE_ORDER) <= QUASIMODE_TOL
    parts.append(f"quasimode={qm.fitted_order:.3f}[{_flag(ok)}]")
    p.summary["order_quasimode"] = qm.fitted_order
    return "h=" + ",".join(f"{h:g}" for h in sweep.h_values) + " " + " ".join(parts)


def stage_oracle(p):
    sp = p.spectral
    mu = fd_oracle_1d(p.curve, p.scale, p.config.indices(), sp, nodes=p.config.grid.oracle_nodes)
    rel = abs(mu - sp.curly_E2) / sp.curly_E2
    p.json("oracle.json", {"oracle_E2": mu, "curlyE2": sp.curly_E2, "relative_error": rel,
                           "nodes": p.config.grid.oracle_nodes, "h": p.scale.h})
    p.summary.update(oracle_E2=mu, oracle_relative_error=rel)
    return f"fd={mu:.6f} curlyE2={sp.curly_E2:.6f} rel_err={rel:.3e}"


def _default_s0(p):
    sp = p.spectral
    if sp.regime is Regime.TWO_TURNING:
        return 0.5 * (sp.s_minus + sp.s_plus)
    c = longitudinal_coefficients(p.curve, p.scale)
    s = np.linspace(0.0, p.curve.L, 4096, endpoint=False)
    return float(s[np.argmin(c.U(s))])


def stage_billiard2d(p):
    b = p.config.billiard
    s0 = _default_s0(p) if b.s0 is None else b.s0
    if b.p_s is None and b.rho0 == 0:
        state = wall_launch(p.curve, p.scale, p.spectral, s0, p_rho=b.p_rho)
    else:
        ham = Hamiltonian2D(p.curve, p.scale, p.spectral)
        state = ham.state(s0, b.p_s or 0.0, b.rho0, b.p_rho or 0.0)
    dt = b.dt or default_dt(p.curve, p.scale, p.spectral)
    traj = flow_2d(p.curve, p.scale, p.spectral, state, b.T, dt=dt, stride=b.stride)
    cols = traj.arrays()
    p.csv("billiard2d.csv", dict(zip(("t", "s", "p_s", "rho", "p_rho", "H"), cols.T)))
    p.summary.update(reflections=traj.reflections, energy_drift=traj.max_drift)
    return (f"steps={int(round(b.T / dt))} reflections={traj.reflections} "
            f"drift={traj.max_drift:.2e}[{_flag(traj.max_drift <= DRIFT_TOL)}]")


def stage_billiard3d(p):
    b, curve = p.config.billiard, p.curve
    if b.ray_origin is None:
        x0, z0 = curve.point(_default_s0(p))
        nx, nz = curve.inner_normal(_default_s0(p))
        depth = 0.05 * curve.diameter()
        origin = np.array([0.0, x0 + depth * nx, z0 + depth * nz])
    else:
        origin = np.array(b.ray_origin)
    if b.ray_direction is None:
        d = np.random.default_rng(b.seed).normal(size=3)
    else:
        d = np.array(b.ray_direction)
    d = d / np.linalg.norm(d)
    if float(_depth(curve, origin)) <= 0:
        raise ConfigError("billiard.ray_origin must lie inside the torus")
    rays = billiard_3d(curve, Ray3D(origin, d), b.bounces)
    pts = np.array([rays[0].origin] + [r.end for r in rays])
    p.csv("billiard3d_path.csv", {"x": pts[:, 0], "y": pts[:, 1], "z": pts[:, 2]})
    ends = np.array([r.end for r in rays])
    lz = np.array([r.angular_momentum for r in rays])
    speed = np.array([np.linalg.norm(r.direction) for r in rays])
    p.csv("billiard3d_bounces.csv", {"bounce": np.arange(1, len(rays) + 1), "x": ends[:, 0], "y": ends[:, 1],
                                     "z": ends[:, 2], "Lz": lz})
    lz_drift = float(np.max(np.abs(lz - lz[0])))
    sp_drift = float(np.max(np.abs(speed - 1.0)))
    p.summary.update(lz_drift=lz_drift, speed_drift=sp_drift)
    return (f"bounces={len(rays)} Lz_drift={lz_drift:.2e}[{_flag(lz_drift <= 1e-10)}] "
            f"speed_drift={sp_drift:.2e}[{_flag(sp_drift <= 1e-14)}]")


def stage_caustic(p):
    sp, curve = p.spectral, p.curve
    mode = p.mode1d
    a, b = (0.0, curve.L) if mode.periodic else mode.support
    s = np.linspace(a, b, p.config.grid.s_nodes)
    caustic = caustic_curve(curve, p.scale, sp)
    rc = caustic.r_c(s)
    x0, z0 = curve.point(s)
    nx, nz = curve.inner_normal(s)
    p.csv("caustic.csv", {"s": s, "rho_c": caustic.rho_c(s), "r_c": rc, "x": x0 + rc * nx, "z": z0 + rc * nz})
    p.summary.update(caustic_depth_min=float(rc.min()), caustic_depth_max=float(rc.max()))
    return f"r_c in [{rc.min():.5f}, {rc.max():.5f}] over s in [{a:.4f}, {b:.4f}]"


RUNNERS = {name: globals()[f"stage_{name}"] for name in STAGES}


def _table(summary):
    keys = ("t_k", "s_minus", "s_plus", "E2", "correction", "curlyE2", "a_n_over_R", "oracle_E2",
            "oracle_relative_error", "psi_norm", "w_norm", "reflections", "energy_drift", "lz_drift")
    rows = [f"  {k:<24}{summary[k]:.6g}" for k in keys if k in summary and summary[k] is not None]
    return "summary\n" + "\n".join(rows)


def run_subcommand(name, config, out=None, h_sweep=None, stream=None):
    """Run one stage (or ``all``) and return the exit status."""
    stream = sys.stdout if stream is None else stream
    pipe = Pipeline(config, out or config.output.directory, h_sweep)
    stages = STAGES if name == "all" else (name,)
    status = EXIT_OK
    for stage in stages:
        try:
            line = RUNNERS[stage](pipe)
        except AuditError as exc:
            print(f"[{stage}] AUDIT FAILURE: {exc}", file=stream)
            status = status or EXIT_AUDIT
            continue
        except ConfigError as exc:
            print(f"[{stage}] config error: {exc}", file=stream)
            return EXIT_CONFIG
        except (WGError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            print(f"[{stage}] error: {type(exc).__name__}: {exc}", file=stream)
            return EXIT_NUMERIC
        print(f"[{stage}] {line}", file=stream)
    if name == "all":
        pipe.json("summary.json", pipe.summary)
        print(_table(pipe.summary), file=stream)
    return status


def _h_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if len(values) < 4 or not all(v > 0 and math.isfinite(v) for v in values):
        raise argparse.ArgumentTypeError("--h-sweep needs at least 4 positive values")
    return values


def build_parser():
    parser = argparse.ArgumentParser(prog="wgtorus", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wgtorus {__version__}")
    parser.add_argument("subcommand", choices=STAGES + ("all",))
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--out", help="output directory (overrides output.directory)")
    parser.add_argument("--h-sweep", type=_h_list, help="comma-separated h values for the residual stage")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        config = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_subcommand(args.subcommand, config, args.out, args.h_sweep)


if __name__ == "__main__":
    sys.exit(main())
