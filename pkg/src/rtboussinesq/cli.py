"""Command-line front end.

    rtboussinesq <command> --config run.toml [--out DIR] [command flags]

Exit codes: 0 success, 2 invalid input, 3 a numerical invariant failed,
4 I/O error.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigParseError, RunConfig, load_config, validate
from .dispersion import (StableProfileError, SupportError, default_xi_grid, dispersion_curve,
                         growth_rate, half_growth_support, root_certificate)
from .modes import build_mode, mode_residual
from .output import emit_plot_data, write_csv, write_manifest, write_records
from .params import ValidationError, rt_unstable_region
from .simulator import (BumpData, CFLError, GalerkinState, RSweepConfig, RTExperimentConfig,
                        SimulationError, Simulator, r_sweep, rt_experiment)
from .spectral1d import build_basis, build_grid
from .stokes2d import RectDomain, assemble_stokes, basis_checks, eigenpairs, export_basis
from .synthesis import FIELDS, BumpWeight, hk_norm, synthesize

EXIT_OK, EXIT_VALIDATION, EXIT_INVARIANT, EXIT_IO = 0, 2, 3, 4

DIAG_COLUMNS = ("t", "kinetic_energy", "u_l2_sq", "grad_u_sq", "slip", "theta_l2", "theta_l4",
                "theta_linf", "v2_l2", "cfl", "clamped", "energy_bound", "energy_bound_ok",
                "theta_drift", "theta_conserved_ok")


def _basis1d(cfg: RunConfig):
    r = cfg.resolution
    return build_basis(build_grid(r.n_nodes), r.n_basis)


def _xi_grid(cfg: RunConfig):
    return default_xi_grid(cfg.xi.n, cfg.xi.lo, cfg.xi.hi)


def _require_unstable(profile):
    if not rt_unstable_region(profile):
        raise StableProfileError("profile is RT-stable; no growth rate exists")


def _curve(cfg: RunConfig):
    basis = _basis1d(cfg)
    profile, params = cfg.steady_profile(), cfg.physical()
    curve = dispersion_curve(basis, profile, params, _xi_grid(cfg), cfg.tolerances.root)
    return basis, profile, params, curve


# ---------------------------------------------------------------------------
# commands; each returns (derived constants, flags)
# ---------------------------------------------------------------------------

def cmd_dispersion(cfg: RunConfig, out: Path, args):
    basis, profile, params, curve = _curve(cfg)
    tol = cfg.tolerances
    rows = []
    for p in curve.points:
        bc = p.bc_residuals or (None, None)
        rows.append([p.xi, p.lambda0, p.lambda_c, p.phi_at_lambda0, p.el_interior_residual,
                     bc[0], bc[1]])
    cols = ["xi", "lambda0", "lambda_c", "phi_at_lambda0", "el_interior", "bc_top", "bc_bottom"]
    emit_plot_data("curve", {"columns": cols, "rows": rows, "x": "xi",
                             "y": ["lambda0", "lambda_c"], "ylabel": "rate"}, out / "curve")
    derived = {"Lambda": curve.capital_lambda, "argmax_xi": curve.argmax_xi,
               "all_stable": curve.all_stable}
    unstable = [p for p in curve.points if p.unstable]
    flags = {
        "root_certificates": all(root_certificate(p, tol.root) for p in unstable),
        "el_residuals": all(p.el_interior_residual <= tol.residual
                            and max(p.bc_residuals) <= tol.residual for p in unstable),
    }
    if not curve.all_stable:
        a, b = half_growth_support(curve, basis, profile, params, 0.5, tol.root)
        derived["half_growth_support"] = [a, b]
    return derived, flags


def cmd_mode(cfg: RunConfig, out: Path, args):
    basis = _basis1d(cfg)
    profile, params = cfg.steady_profile(), cfg.physical()
    _require_unstable(profile)
    xi = args.xi
    if xi is None:
        _, _, _, curve = _curve(cfg)
        xi = curve.argmax_xi
    if xi == 0:
        raise ValidationError("--xi: must be nonzero")
    gp = growth_rate(basis, profile, params, abs(xi), cfg.tolerances.root)
    if not gp.unstable:
        raise StableProfileError(f"no growth rate exists at ξ={xi:g}")
    mode = build_mode(gp, profile, params, xi=xi)
    res = mode_residual(mode)
    x = mode.x2
    rows = np.column_stack([x, mode.u1, mode.u2, mode.varpi, mode.h])
    emit_plot_data("field", {"columns": ["x2", "U1", "U2", "varpi", "h"], "rows": rows.tolist()},
                   out / "mode")
    derived = {"xi": xi, "lambda0": gp.lambda0, "lambda_c": gp.lambda_c, "residuals": res}
    return derived, {"mode_residual": res["max"] <= cfg.tolerances.residual}


def cmd_synth(cfg: RunConfig, out: Path, args):
    basis, profile, params, curve = _curve(cfg)
    if curve.all_stable:
        raise StableProfileError("profile is RT-stable; no growth rate exists")
    syn = cfg.synthesis
    center = args.f_center if args.f_center is not None else syn.f_center
    width = args.f_width if args.f_width is not None else syn.f_width
    times = args.times if args.times is not None else syn.times
    if center is None or width is None:
        a, b = half_growth_support(curve, basis, profile, params, 0.5, cfg.tolerances.root)
        center = curve.argmax_xi
        width = min(center - a, b - center)
    f = BumpWeight(center, width, syn.f_amplitude)
    times = sorted(set([0.0] + [float(t) for t in times]))
    fields = synthesize(curve, f, times, basis, profile, params, norm_tol=cfg.tolerances.norm,
                        length_factor=syn.length_factor, tol=cfg.tolerances.root)
    lam_f = float(min(np.min(fields.lambdas), *(growth_rate(
        basis, profile, params, z, cfg.tolerances.root, residuals=False).lambda0 for z in f.support)))
    cap = curve.capital_lambda
    rows = []
    ok = True
    for i, t in enumerate(times):
        n = [hk_norm(fields, k, i) for k in range(3)]
        r1 = n[1] / hk_norm(fields, 1, 0)
        lo, hi = math.exp(lam_f * t), math.exp(cap * t)
        ok &= lo * (1 - 1e-3) <= r1 <= hi * (1 + 1e-3)
        rows.append([t, n[0], n[1], n[2], r1, lo, hi])
    slope = float(np.polyfit(times, np.log([r[2] for r in rows]), 1)[0]) if len(times) > 1 else None
    emit_plot_data("timeseries", {"columns": ["t", "H0", "H1", "H2", "H1_ratio", "lower", "upper"],
                                  "rows": rows, "x": "t", "y": ["H1_ratio", "lower", "upper"],
                                  "ylabel": "H1 growth", "slope": slope}, out / "norms")
    if syn.snapshots:
        X1, X2 = np.meshgrid(fields.x1, fields.x2, indexing="ij")
        for i, t in enumerate(times):
            snap = fields.snapshot(i)
            cols = np.column_stack([X1.ravel(), X2.ravel()] + [snap[k].ravel() for k in FIELDS])
            write_csv(out / f"field_t{t:g}.csv", ["x1", "x2", "v1", "v2", "pi", "theta"], cols.tolist())
    derived = {"Lambda": cap, "argmax_xi": curve.argmax_xi, "lambda_f": lam_f, "f": f.as_dict(),
               "n_xi_history": fields.n_xi_history, "times": times}
    return derived, {"growth_envelope": bool(ok)}


def cmd_stokes(cfg: RunConfig, out: Path, args):
    params = cfg.physical()
    r = args.R if args.R is not None else cfg.simulation.R
    m = args.m if args.m is not None else cfg.resolution.m_modes
    res = cfg.resolution
    op = assemble_stokes(RectDomain(r, res.nx, res.ny), params)
    basis = eigenpairs(op, m)
    checks = basis_checks(basis)
    export_basis(basis, out)
    write_csv(out / "eigenvalues.csv", ["n", "lambda"],
              [[i + 1, lam] for i, lam in enumerate(basis.lambdas)])
    flags = {"l2_orthonormal": checks["l2_defect"] <= 1e-8,
             "energy_diagonal": checks["energy_defect"] <= 1e-6,
             "divergence": checks["divergence"] <= 1e-8,
             "positive_increasing": bool(basis.lambdas[0] > 0 and np.all(np.diff(basis.lambdas) >= 0))}
    return {"R": r, "m": m, "checks": checks}, flags


def _initial_data(cfg: RunConfig, sim: Simulator):
    s = cfg.simulation
    m = sim.basis.m
    if s.initial == "zero":
        return np.zeros(m), (lambda a, b: np.zeros(np.shape(a)))
    if s.initial == "stokes":
        f0 = np.zeros(m)
        f0[0] = s.amplitude
        return f0, (lambda a, b: np.zeros(np.shape(a)))
    if s.initial == "bump":
        data = BumpData(tuple(s.bump_center), s.bump_radius, s.bump_amplitude)
        if not data.fits(s.R):
            raise ValidationError("simulation.bump_center: bump support must lie inside Ω_R")
        return np.zeros(m), data
    profile, params = sim.profile, sim.params
    _require_unstable(profile)
    basis = _basis1d(cfg)
    xi = s.mode_xi
    if xi is None:
        xi = dispersion_curve(basis, profile, params, _xi_grid(cfg), cfg.tolerances.root).argmax_xi
    gp = growth_rate(basis, profile, params, xi, cfg.tolerances.root, residuals=False)
    if not gp.unstable:
        raise StableProfileError(f"no growth rate exists at ξ={xi:g}")
    md = build_mode(gp, profile, params)
    X1, X2 = sim.X1, sim.X2
    amp = s.amplitude
    v1 = amp * md.evaluate("u1", X2.ravel()).reshape(X1.shape) * np.sin(xi * X1)
    v2 = amp * md.evaluate("u2", X2.ravel()).reshape(X1.shape) * np.cos(xi * X1)

    def theta0(a, b):
        a = np.asarray(a, dtype=float)
        return amp * md.evaluate("h", np.ravel(b)).reshape(a.shape) * np.cos(xi * a)

    return sim.project_velocity(v1, v2), theta0


def cmd_simulate(cfg: RunConfig, out: Path, args):
    s = cfg.simulation
    system = args.system or s.system
    mode = args.mode or s.mode
    if system == "full" and s.initial == "mode":
        raise ValidationError("simulation.initial: a mode seed needs the perturbed system")
    params = cfg.physical()
    profile = cfg.steady_profile()
    res = cfg.resolution
    basis = eigenpairs(assemble_stokes(RectDomain(s.R, res.nx, res.ny), params), res.m_modes)
    sim = Simulator(basis, params, system, mode, profile if system == "perturbed" else None,
                    integrator=s.integrator, cfl=s.cfl)
    f0, theta0 = _initial_data(cfg, sim)
    if not sim.linearized:
        try:
            sim.check_cfl(f0, s.dt)
        except CFLError as exc:
            raise ValidationError(f"simulation.dt: {exc}") from None
    result = sim.run(GalerkinState(f0), sim.initial_theta(theta0), s.dt, s.T,
                     record_every=s.record_every, snapshot_times=s.snapshot_times)
    write_records(out / "diagnostics.csv", result.records, DIAG_COLUMNS)
    v2 = np.array([r["v2_l2"] for r in result.records])
    t = np.array([r["t"] for r in result.records])
    slope = None
    if np.all(v2 > 0) and len(t) > 2:
        slope = float(np.polyfit(t, np.log(v2), 1)[0])
        emit_plot_data("timeseries", {"columns": ["t", "v2_l2"], "rows": np.column_stack([t, v2]).tolist(),
                                      "x": "t", "y": ["v2_l2"], "slope": slope}, out / "growth")
    X1, X2 = sim.X1.ravel(), sim.X2.ravel()
    for when, (u1, u2, th) in sorted(result.snapshots.items()):
        emit_plot_data("field", {"columns": ["x1", "x2", "u1", "u2", "theta"],
                                 "rows": np.column_stack([X1, X2, u1.ravel(), u2.ravel(), th.ravel()]).tolist()},
                       out / f"snapshot_t{when:g}")
    flags = {"energy_bound": all(r["energy_bound_ok"] for r in result.records),
             "theta_conservation": all(r["theta_conserved_ok"] for r in result.records)}
    derived = {"system": system, "mode": mode, "v2_growth_rate": slope,
               "lambdas": basis.lambdas.tolist(), "clamped_points": result.records[-1]["clamped"]}
    return derived, flags


def cmd_rt_experiment(cfg: RunConfig, out: Path, args):
    e = cfg.experiment
    eps = args.epsilon if args.epsilon is not None else e.epsilon
    K = args.K if args.K is not None else e.K
    res = cfg.resolution
    rcfg = RTExperimentConfig(cfg.physical(), cfg.steady_profile(), epsilons=eps, K=K,
                              delta0=e.delta0, T=e.T, dt=e.dt, R=e.R, nx=e.nx, ny=e.ny, m=e.m,
                              n_nodes=res.n_nodes, n_basis=res.n_basis, xi_grid=_xi_grid(cfg),
                              tol=cfg.tolerances.root, cfl=cfg.simulation.cfl,
                              band_fraction=e.band_fraction)
    if cfg.synthesis.f_center is not None:
        rcfg.f = BumpWeight(cfg.synthesis.f_center, cfg.synthesis.f_width, cfg.synthesis.f_amplitude)
    rep = rt_experiment(rcfg)
    cols = ["t", "v2_linear"]
    data = [rep.linear_times, rep.linear_v2]
    for r in rep.runs:
        n = len(rep.linear_times)
        pad = lambda a: np.concatenate([a, np.full(n - len(a), np.nan)])  # noqa: E731
        cols += [f"v2_eps{r.epsilon:g}", f"deviation_eps{r.epsilon:g}"]
        data += [pad(r.v2_norm), pad(r.deviation)]
    rows = np.column_stack(data).tolist()
    write_csv(out / "rt_timeseries.csv", cols, rows)
    y = ["v2_linear"] + [f"v2_eps{r.epsilon:g}" for r in rep.runs if not r.trivial]
    scaled = [[row[0], row[1]] + [row[2 + 2 * i] / r.epsilon for i, r in enumerate(rep.runs) if not r.trivial]
              for row in rows]
    emit_plot_data("timeseries", {"columns": ["t"] + y, "rows": scaled, "x": "t", "y": y,
                                  "ylabel": "||v2|| (rescaled by 1/eps)",
                                  "slope": rep.linear_exponent}, out / "rt_growth")
    derived = rep.summary()
    flags = {k: v for k, v in rep.flags.items() if isinstance(v, bool)}
    return derived, flags


def cmd_r_sweep(cfg: RunConfig, out: Path, args):
    s, sim = cfg.sweep, cfg.simulation
    r_list = args.R_list if args.R_list is not None else s.R_list
    data = BumpData(tuple(sim.bump_center), sim.bump_radius, sim.bump_amplitude)
    scfg = RSweepConfig(cfg.physical(), data, T=s.T, dt=s.dt, nx_per_unit=s.nx_per_unit, ny=s.ny,
                        m_per_unit=s.m_per_unit, record_every=s.record_every, cfl=sim.cfl)
    rep = r_sweep(scfg, r_list)
    rows = []
    for entry in rep["runs"]:
        for r in entry["records"]:
            rows.append([entry["R"]] + [r.get(c) for c in DIAG_COLUMNS])
    write_csv(out / "diagnostics.csv", ["R"] + list(DIAG_COLUMNS), rows)
    summary = [{k: v for k, v in e.items() if k != "records"} for e in rep["runs"]]
    derived = {"runs": summary, "spread": rep["spread"]}
    return derived, {"bounds": rep["bounds_ok"], "spread_within_5pct": rep["spread"] <= 0.05}


COMMANDS = {
    "dispersion": cmd_dispersion,
    "mode": cmd_mode,
    "synth": cmd_synth,
    "stokes-eigs": cmd_stokes,
    "simulate": cmd_simulate,
    "rt-experiment": cmd_rt_experiment,
    "r-sweep": cmd_r_sweep,
}


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rtboussinesq", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--out", help="output directory (default: config 'output')")
        return sp

    add("dispersion", "growth-rate curve over the ξ grid")
    sp = add("mode", "normal mode profiles at one frequency")
    sp.add_argument("--xi", type=float, help="frequency (default: most unstable)")
    sp = add("synth", "real solution synthesized from a bump weight")
    sp.add_argument("--f-center", type=float)
    sp.add_argument("--f-width", type=float)
    sp.add_argument("--times", type=_floats)
    sp = add("stokes-eigs", "Stokes eigenpairs on the rectangle")
    sp.add_argument("--R", type=float)
    sp.add_argument("--m", type=int)
    sp = add("simulate", "semi-Galerkin time integration")
    sp.add_argument("--system", choices=("full", "perturbed"))
    sp.add_argument("--mode", choices=("linearized", "nonlinear"))
    sp = add("rt-experiment", "escape-time experiment with an ε sweep")
    sp.add_argument("--epsilon", type=_floats)
    sp.add_argument("--K", type=float)
    sp = add("r-sweep", "same data on several domain widths")
    sp.add_argument("--R-list", dest="R_list", type=_floats)
    return p


def run_command(command: str, cfg: RunConfig, out, args=None) -> int:
    """Run one pipeline, write outputs and manifest; return the exit status."""
    out = Path(out)
    args = args if args is not None else build_parser().parse_args([command, "--config", "-"])
    t0 = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        derived, flags = COMMANDS[command](cfg, out, args)
    except (ValidationError, StableProfileError, SupportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CFLError, SimulationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error [{command}]: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error [{command}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg.to_dict(),
        "derived": derived,
        "flags": flags,
        "timings": {"wall_seconds": time.perf_counter() - t0},
    }
    try:
        write_manifest(out / "manifest.json", manifest)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    failed = [k for k, v in flags.items() if v is False]
    if failed:
        print(f"invariant check failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(args.out) if args.out else Path(cfg.output)
    return run_command(args.command, validate(cfg), out, args)


if __name__ == "__main__":
    sys.exit(main())
