"""Command-line front end.

Exit codes: 0 success, 1 config or parse error (stderr only), 2 physically
infeasible result (the report is still written).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Callable, Optional, Sequence

import numpy as np

from . import backgrounds as bg
from . import budget
from . import entangle as ent
from . import interferometer as sg
from .config import apply_overrides, config_from_dict, config_to_dict
from .errors import ConfigError, InfeasibleError, QgemError
from .physcore import (
    CONSTANTS,
    DIPOLE,
    FREQUENCY,
    LENGTH,
    MASS,
    TEMPERATURE,
    parse_quantity,
    to_si,
)

MAX_SEED = 2 ** 64 - 1


class _Infeasible(Exception):
    """Carries an already-rendered report out of a handler with exit code 2."""

    def __init__(self, text: str, message: str):
        super().__init__(message)
        self.text = text


# -- rendering ---------------------------------------------------------------

def _num(x):
    if x is None or isinstance(x, (bool, str)):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else None


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else
                                          ("true" if v is True else "false" if v is False
                                           else str(v))) for v in row])
    return buf.getvalue()


def _key_value(d: dict, fmt: str) -> str:
    d = {k: _num(v) for k, v in d.items()}
    if fmt == "json":
        return _json(d)
    return _csv(("key", "value"), d.items())


def _quantity(text: str, dims, flag: str) -> float:
    try:
        return to_si(parse_quantity(text), dims)
    except QgemError as exc:
        raise ConfigError(f"{flag}: {exc}") from exc


def _float(text: str, flag: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{flag}: expected a number, got {text!r}") from exc


# -- config assembly ---------------------------------------------------------

# flag attribute -> config path
_FLAG_PATHS = {
    "mass": "mass", "gradient": "gradient", "t1": "t1", "pair": "spin_pair",
    "g_factor": "g_factor", "tau": "tau", "d": "geometry.d", "dx": "geometry.dx",
    "arrangement": "geometry.arrangement", "p": "dipole.p", "kappa": "dipole.kappa",
}


def _experiment(args) -> budget.ExperimentConfig:
    """Config file, then --set overrides, then explicit flags."""
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    else:
        raw = {"schema": budget.SCHEMA_VERSION}
    overrides = list(args.set or [])
    for attr, path in _FLAG_PATHS.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides.append(f"{path}={value}")
    return config_from_dict(apply_overrides(raw, overrides))


def _parse_axis(text: str) -> budget.Axis:
    """``path=v1,v2,...``, ``path=lin:start:stop:num`` or ``path=log:start:stop:num``."""
    path, sep, spec = text.partition("=")
    path = path.strip()
    if not sep:
        raise ConfigError(f"--axis must look like path=values, got {text!r}")
    budget.check_path(path)
    dims = budget.path_dims(path)

    def value(tok):
        tok = tok.strip()
        try:
            return float(tok)
        except ValueError:
            return _quantity(tok, dims, f"--axis {path}")

    kind = spec.split(":", 1)[0].strip()
    if kind in ("lin", "log"):
        parts = spec.split(":")
        if len(parts) != 4:
            raise ConfigError(f"--axis {path}: expected {kind}:start:stop:num")
        start, stop = value(parts[1]), value(parts[2])
        try:
            num = int(parts[3])
        except ValueError as exc:
            raise ConfigError(f"--axis {path}: num must be an integer") from exc
        if num < 1:
            raise ConfigError(f"--axis {path}: num must be >= 1")
        if kind == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError(f"--axis {path}: log range needs positive bounds")
            return budget.Axis.logspace(path, start, stop, num)
        return budget.Axis.linspace(path, start, stop, num)
    if not spec.strip():
        raise ConfigError(f"axis {path!r} has no values")
    return budget.Axis(path, tuple(value(t) for t in spec.split(",")))


def _scan_spec(args) -> budget.ScanSpec:
    if not args.axis:
        raise ConfigError("at least one --axis is required")
    return budget.ScanSpec(tuple(_parse_axis(a) for a in args.axis),
                           objective=args.objective, seed=args.seed)


# -- handlers ----------------------------------------------------------------

def cmd_constants(args) -> str:
    values = CONSTANTS.as_dict()
    if args.format == "csv":
        return _csv(("name", "value"), values.items())
    return _json(values)


def _trajectory(args):
    cfg = _experiment(args)
    spec = sg.splitting_from_pair(cfg.spin_pair, cfg.gradient, cfg.mass, cfg.g_factor)
    return cfg, sg.simulate_branches(spec, sg.free_flight_sequence(cfg.t1), n_samples=args.samples)


def cmd_sg_trace(args) -> str:
    _, traj = _trajectory(args)
    if args.format == "json":
        return _json({
            "max_separation": sg.max_separation(traj),
            "integrated_separation": sg.integrated_separation(traj),
            "closure_position": traj.closure_position,
            "closure_velocity": traj.closure_velocity,
            "trajectory": {k: [float(x) for x in getattr(traj, k)]
                           for k in sg.TRAJECTORY_COLUMNS},
        })
    buf = io.StringIO()
    sg.write_trajectory_csv(traj, buf)
    return buf.getvalue()


def cmd_sg_fringe(args) -> str:
    cfg, traj = _trajectory(args)
    g_local = _quantity(args.g_local, (1, 0, -2, 0, 0, 0, 0), "--g-local")
    try:
        report = sg.fringe_report(traj, cfg.mass, g_local)
    except InfeasibleError as exc:
        report = {"max_separation": sg.max_separation(traj),
                  "integrated_separation": sg.integrated_separation(traj),
                  "fringe_tilt": None,
                  "reference_fringe_tilt": sg.REFERENCE_FRINGE_TILT,
                  "error": str(exc)}
        raise _Infeasible(_key_value(report, args.format), str(exc)) from exc
    return _key_value(report, args.format)


def _entangled_state(args):
    cfg = _experiment(args)
    phases = ent.gravitational_phases(cfg.mass, cfg.tau, ent.pairwise_distances(cfg.geometry))
    state = ent.assemble_state(phases)
    g1 = _quantity(args.gamma1, FREQUENCY, "--gamma1")
    g2 = _quantity(args.gamma2, FREQUENCY, "--gamma2")
    if g1 < 0 or g2 < 0:
        raise ConfigError("dephasing rates must be >= 0")
    if g1 or g2:
        state = ent.apply_dephasing(state, ent.DephasingModel(g1, g2, cfg.tau))
    return cfg, phases, state


def cmd_entangle_phases(args) -> str:
    _, phases, _ = _entangled_state(args)
    if args.format == "csv":
        return _csv(("branch", "phase"), phases.as_dict().items())
    return _json({**phases.as_dict(), "entangling_phase": ent.entangling_phase(phases)})


def cmd_entangle_state(args) -> str:
    _, _, state = _entangled_state(args)
    if args.format == "csv":
        rows = ((i, j, float(state.rho[i, j].real), float(state.rho[i, j].imag))
                for i in range(4) for j in range(4))
        return _csv(("row", "col", "re", "im"), rows)
    return _json({"basis": list(ent.BRANCHES), "rho": state.to_json(),
                  "negativity": ent.negativity(state)})


def cmd_entangle_witness(args) -> str:
    cfg, phases, state = _entangled_state(args)
    W = ent.witness_value(state)
    ok = ent.certifies(W)
    report = {
        "entangling_phase": ent.entangling_phase(phases),
        "negativity": ent.negativity(state),
        "witness": W,
        "witness_canonical": ent.witness_value(state, optimize_frames=False),
        "certifies": ok,
        "runs_required": ent.runs_required(W, cfg.confidence_z) if ok else None,
        "confidence_z": cfg.confidence_z,
    }
    text = _key_value(report, args.format)
    if not ok:
        raise _Infeasible(text, f"witness {W!r} does not exceed 1")
    return text


def cmd_background_dipole(args) -> str:
    if args.config or args.set:
        cfg = _experiment(args)
        m, d, p, kappa = cfg.mass, cfg.geometry.d, cfg.dipole_p, cfg.dipole_kappa
    else:
        if args.mass is None:
            raise ConfigError("--mass is required without --config")
        m = _quantity(args.mass, MASS, "--mass")
        d = _quantity(args.d or "400 um", LENGTH, "--d")
        p = _quantity(args.p or "0 C*m", DIPOLE, "--p")
        kappa = _float(args.kappa, "--kappa") if args.kappa is not None else 1.0
    try:
        spec = bg.DipoleSpec(p, kappa)
        report = {"mass": m, "d": d, "p": p, "kappa": kappa,
                  "ratio_scaling": bg.dipole_gravity_ratio_scaling(m, d, p),
                  "ratio_fp": bg.dipole_gravity_ratio_fp(m, d, spec),
                  "dipole_force": bg.dipole_dipole_force(p, d, kappa),
                  "gravity_force": CONSTANTS.G * m * m / (d * d)}
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return _key_value(report, args.format)


def _surface_and_oscillator(args):
    a = _quantity(args.radius, LENGTH, "--radius")
    eta = _float(args.eta, "--eta")
    eps = _float(args.epsilon, "--epsilon")
    f0 = _quantity(args.f0, FREQUENCY, "--f0")
    Q = _float(args.Q, "--Q")
    T_cm = _quantity(args.T_cm, TEMPERATURE, "--T-cm")
    b = _quantity(args.bandwidth, FREQUENCY, "--bandwidth")
    z_rms = _quantity(args.z_rms, LENGTH, "--z-rms")
    try:
        mass = (_quantity(args.osc_mass, MASS, "--osc-mass") if args.osc_mass
                else bg.diamond_sphere(2 * a)[1])
        surface = bg.SurfaceSpec(a, 2 * a if args.z is None else
                                 _quantity(args.z, LENGTH, "--z"), eta, eps)
        osc = bg.OscillatorSpec.from_mass(mass, 2 * math.pi * f0, Q, T_cm, b, z_rms)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return surface, osc


def _z_grid(args, surface):
    if args.z is not None:
        return [surface.z]
    lo = _quantity(args.z_min, LENGTH, "--z-min")
    hi = _quantity(args.z_max, LENGTH, "--z-max")
    if args.num < 1 or not hi >= lo > surface.a:
        raise ConfigError("need --num >= 1 and --z-max >= --z-min > --radius")
    z = np.geomspace(lo, hi, args.num)
    z[0], z[-1] = lo, hi
    return [float(v) for v in z]


def cmd_background_casimir(args) -> str:
    surface, osc = _surface_and_oscillator(args)
    try:
        rows = bg.casimir_sweep(surface, _z_grid(args, surface), osc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cols = ("z", "force", "regime", "freq_shift", "min_detectable")
    if args.format == "json":
        return _json([{k: _num(r[k]) for k in cols} for r in rows])
    return _csv(cols, ([r[k] for k in cols] for r in rows))


def cmd_background_detect(args) -> str:
    surface, osc = _surface_and_oscillator(args)
    zs = _z_grid(args, surface)
    try:
        z_max = bg.casimir_detect_range(surface, zs, osc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = {"detect_range": z_max, "min_detectable": bg.min_detectable_shift(osc),
              "radius": surface.a, "spring_constant": osc.k, "omega0": osc.omega0,
              "Q": osc.Q, "T_cm": osc.T_cm, "bandwidth": osc.b, "z_rms": osc.z_rms,
              "z_min": zs[0], "z_max": zs[-1]}
    text = _key_value(report, args.format)
    if z_max == 0.0:
        raise _Infeasible(text, "Casimir shift is below the thermal floor over the whole sweep")
    return text


def cmd_background_shield(args) -> str:
    p = _quantity(args.p or "1e-4 e*cm", DIPOLE, "--p")
    z = _quantity(args.z or "50 um", LENGTH, "--z")
    m = _quantity(args.mass or "1e-14 kg", MASS, "--mass")
    d = _quantity(args.d or "400 um", LENGTH, "--d")
    k_img = _float(args.kappa_img, "--kappa-img")
    try:
        f_img = bg.image_dipole_force(p, z, k_img)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    f_grav = CONSTANTS.G * m * m / (d * d)
    return _key_value({"image_force": f_img, "gravity_force": f_grav,
                       "image_over_gravity": f_img / f_grav, "z": z, "p": p,
                       "kappa_img": k_img}, args.format)


def _report_text(report: budget.FeasibilityReport, fmt: str) -> str:
    if fmt == "csv":
        return _csv(("name", "passed", "measured", "bound", "informational"),
                    ((c.name, c.passed, _num(c.measured), _num(c.bound), c.informational)
                     for c in report.constraints))
    return _json(report.as_dict())


def cmd_budget_check(args) -> str:
    report = budget.evaluate(_experiment(args))
    text = _report_text(report, args.format)
    if not report.feasible:
        failed = [c.name for c in report.constraints if not c.informational and not c.passed]
        raise _Infeasible(text, f"constraints failed: {', '.join(failed)}")
    return text


def cmd_scan(args) -> str:
    spec = _scan_spec(args)
    rows = budget.scan(spec, _experiment(args), workers=args.workers)
    if args.format == "json":
        return _json([{"params": dict(r.params), "report": r.report.as_dict()} for r in rows])
    buf = io.StringIO()
    budget.write_scan_csv(rows, buf)
    return buf.getvalue()


def cmd_optimize(args) -> str:
    spec = _scan_spec(args)
    res = budget.optimize(spec, _experiment(args), workers=args.workers)
    if args.format == "csv":
        text = _csv(("key", "value"), [*res.params, ("objective", res.objective),
                                        ("score", res.score),
                                        ("grid_best_score", res.grid_best_score),
                                        ("n_evaluations", res.n_evaluations),
                                        ("feasible", res.report.feasible),
                                        ("all_infeasible", res.all_infeasible)])
    else:
        text = _json({"objective_name": spec.objective, "params": dict(res.params),
                      "objective": _num(res.objective), "score": _num(res.score),
                      "grid_best_score": _num(res.grid_best_score),
                      "n_evaluations": res.n_evaluations, "all_infeasible": res.all_infeasible,
                      "config": config_to_dict(res.config), "report": res.report.as_dict()})
    if res.all_infeasible:
        raise _Infeasible(text, "no feasible point in the search box; best effort reported")
    return text


# -- parser ------------------------------------------------------------------

def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from exc
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64 - 1]")
    return v


def _common(default_format: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="JSON experiment config (schema 1)")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=default_format,
                   help=f"output format (default: {default_format}); numbers in SI base units")
    p.add_argument("--seed", type=_seed, default=0, metavar="U64",
                   help="seed for seeded search steps (default: 0)")
    p.add_argument("--set", action="append", metavar='PATH="VALUE UNIT"',
                   help='config override, e.g. --set geometry.d="400 um" (repeatable)')
    return p


def _config_flags(p, *names):
    helps = {
        "mass": ("--mass", 'particle mass with unit, e.g. "1e-14 kg" or "10 pg"'),
        "gradient": ("--gradient", 'magnetic field gradient, e.g. "1e4 T/m"'),
        "t1": ("--t1", 'pulse spacing; pi pulses at t1 and 3 t1, readout at 4 t1, e.g. "0.25 ms"'),
        "pair": ("--pair", "spin projections (ms_left,ms_right) in units of hbar, e.g. 0,-1"),
        "g_factor": ("--g-factor", "electron g-factor, dimensionless"),
        "tau": ("--tau", 'interaction time, e.g. "1 s"'),
        "d": ("--d", 'interferometer separation, e.g. "400 um"'),
        "dx": ("--dx", 'superposition size, e.g. "100 um"'),
        "arrangement": ("--arrangement", "linear or parallel"),
        "p": ("--p", 'electric dipole moment, e.g. "1e-4 e*cm" (C*m)'),
        "kappa": ("--kappa", "dipole orientation factor, dimensionless in (0, 4]"),
    }
    for n in names:
        flag, text = helps[n]
        kw = {"choices": ("linear", "parallel")} if n == "arrangement" else {}
        p.add_argument(flag, dest=n, default=None, help=text, **kw)


def _oscillator_flags(p):
    p.add_argument("--radius", default="85 nm", help='sphere radius a (default "85 nm")')
    p.add_argument("--z", default=None, help="single centre-to-surface distance z (m); "
                                             "overrides the sweep")
    p.add_argument("--z-min", default="1 um", help='sweep start z (default "1 um")')
    p.add_argument("--z-max", default="100 um", help='sweep stop z (default "100 um")')
    p.add_argument("--num", type=int, default=50, help="number of log-spaced z points (count)")
    p.add_argument("--eta", default="1", help="PFA reduction factor eta, dimensionless in [0, 1]")
    p.add_argument("--epsilon", default="5.7", help="relative permittivity, dimensionless")
    p.add_argument("--f0", default="10 kHz", help='trap frequency in Hz (default "10 kHz")')
    p.add_argument("--Q", default="1e8", help="mechanical quality factor, dimensionless")
    p.add_argument("--T-cm", dest="T_cm", default="100 uK",
                   help='centre-of-mass temperature (default "100 uK")')
    p.add_argument("--bandwidth", default="1 Hz", help='measurement bandwidth (default "1 Hz")')
    p.add_argument("--z-rms", dest="z_rms", default="100 nm",
                   help='oscillation amplitude (default "100 nm")')
    p.add_argument("--osc-mass", default=None,
                   help="oscillator mass (kg); default: diamond sphere of the given radius")


def _scan_flags(p):
    p.add_argument("--axis", action="append", metavar="PATH=VALUES",
                   help="scan axis: path=v1,v2,... or path=log:start:stop:num or "
                        "path=lin:start:stop:num; values SI or with units, e.g. "
                        'mass=log:1e-15 kg:1e-13 kg:10 (repeatable)')
    p.add_argument("--workers", type=int, default=1, help="worker processes (count)")
    p.add_argument("--objective", choices=budget.OBJECTIVES, default="witness_margin",
                   help="witness_margin (W - 1), negativity, or runs_required "
                        "(maximises -log10 runs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qgem", description="Feasibility calculator for gravity-mediated entanglement "
                                 "of two spin interferometers. All outputs in SI units.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", parents=[_common("json")],
                       help="physical constants (SI)")
    p.set_defaults(func=cmd_constants)

    sgp = sub.add_parser("sg", help="Stern-Gerlach branch kinematics")
    sgs = sgp.add_subparsers(dest="action", required=True)
    for name, func, fmt, desc in (("trace", cmd_sg_trace, "csv", "branch trajectories (t s, x m, v m/s)"),
                                  ("fringe", cmd_sg_fringe, "json", "one-fringe tilt angle (rad)")):
        p = sgs.add_parser(name, parents=[_common(fmt)], help=desc)
        _config_flags(p, "mass", "gradient", "t1", "pair", "g_factor")
        p.add_argument("--samples", type=int, default=401, help="trajectory samples (count)")
        if name == "fringe":
            p.add_argument("--g-local", default="9.80665 m/s^2",
                           help='local gravitational acceleration (default "9.80665 m/s^2")')
        p.set_defaults(func=func)

    ep = sub.add_parser("entangle", help="two-interferometer entanglement")
    es = ep.add_subparsers(dest="action", required=True)
    for name, func, desc in (("phases", cmd_entangle_phases, "branch phases (rad)"),
                             ("state", cmd_entangle_state, "4x4 density matrix"),
                             ("witness", cmd_entangle_witness, "negativity, witness and runs")):
        p = es.add_parser(name, parents=[_common("json")], help=desc)
        _config_flags(p, "mass", "tau", "d", "dx", "arrangement")
        p.add_argument("--gamma1", default="0 s^-1", help='dephasing rate of qubit A (s^-1)')
        p.add_argument("--gamma2", default="0 s^-1", help='dephasing rate of qubit B (s^-1)')
        p.set_defaults(func=func)

    bp = sub.add_parser("background", help="electromagnetic backgrounds")
    bs = bp.add_subparsers(dest="action", required=True)
    p = bs.add_parser("dipole", parents=[_common("json")],
                      help="dipole-dipole to gravity ratio (dimensionless)")
    _config_flags(p, "mass", "d", "p", "kappa")
    p.set_defaults(func=cmd_background_dipole)
    p = bs.add_parser("casimir", parents=[_common("csv")],
                      help="Casimir sweep: z m, force N, regime, freq_shift, min_detectable")
    _oscillator_flags(p)
    p.set_defaults(func=cmd_background_casimir)
    p = bs.add_parser("detect", parents=[_common("json")],
                      help="largest z (m) at which the Casimir shift beats the thermal floor")
    _oscillator_flags(p)
    p.set_defaults(func=cmd_background_detect)
    p = bs.add_parser("shield", parents=[_common("json")],
                      help="image-dipole attraction to a conducting shield (N)")
    _config_flags(p, "mass", "d", "p")
    p.add_argument("--z", default=None, help='distance to the shield (default "50 um")')
    p.add_argument("--kappa-img", default="2", help="image orientation factor, dimensionless")
    p.set_defaults(func=cmd_background_shield)

    bup = sub.add_parser("budget", help="feasibility verdicts")
    bus = bup.add_subparsers(dest="action", required=True)
    p = bus.add_parser("check", parents=[_common("json")], help="evaluate one configuration")
    _config_flags(p, "mass", "tau", "t1", "gradient", "d", "dx", "arrangement", "p", "kappa")
    p.set_defaults(func=cmd_budget_check)

    for name, func, fmt, desc in (("scan", cmd_scan, "csv", "grid scan, one row per point"),
                                  ("optimize", cmd_optimize, "json",
                                   "grid seeding plus bounded simplex refinement")):
        p = sub.add_parser(name, parents=[_common(fmt)], help=desc)
        _config_flags(p, "mass", "tau", "t1", "gradient", "d", "dx", "arrangement", "p", "kappa")
        _scan_flags(p)
        p.set_defaults(func=func)
    return parser


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    func: Callable = args.func
    try:
        text = func(args)
    except _Infeasible as exc:
        _emit(exc.text, args.out)
        print(f"qgem: infeasible: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        print(f"qgem: infeasible: {exc}", file=sys.stderr)
        return 2
    except (QgemError, ValueError) as exc:
        print(f"qgem: error: {exc}", file=sys.stderr)
        return 1
    try:
        _emit(text, args.out)
    except OSError as exc:
        print(f"qgem: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
