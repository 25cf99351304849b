"""Feasibility verdicts for a two-interferometer experiment and design search."""
from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from . import backgrounds as bg
from . import entangle as ent
from . import interferometer as sg
from .errors import ConfigError, QgemError
from .physcore import (
    CONSTANTS,
    DIPOLE,
    FIELD_GRADIENT,
    FREQUENCY,
    LENGTH,
    MASS,
    TIME,
    as_si,
)

SCHEMA_VERSION = 1
DEFAULT_RATIO_THRESHOLD = 0.1
ENTANGLED_TOL = 1e-12
OBJECTIVES = ("witness_margin", "negativity", "runs_required")

# a failed constraint costs more than any objective range can recover
FAIL_PENALTY = 10.0
INVALID_SCORE = -1e9


@dataclass(frozen=True)
class ExperimentConfig:
    mass: float
    geometry: ent.TwoInterferometerGeometry = field(default_factory=ent.TwoInterferometerGeometry)
    tau: float = 1.0
    t1: float = 0.25
    gradient: float = 1e4
    spin_pair: tuple = (1, -1)
    g_factor: float = CONSTANTS.g_e
    dipole_p: float = 0.0
    dipole_kappa: float = 1.0
    mitigation: tuple = ()      # ((method, suppression), ...)
    dephasing: tuple = ()       # ((source, rate in 1/s), ...)
    coherence_time: float = 1.0
    ratio_threshold: float = DEFAULT_RATIO_THRESHOLD
    shield_enabled: bool = False
    shield_z: float = 50e-6
    confidence_z: float = 3.0

    def __post_init__(self):
        conv = {"mass": MASS, "tau": TIME, "t1": TIME, "gradient": FIELD_GRADIENT,
                "dipole_p": DIPOLE, "coherence_time": TIME, "shield_z": LENGTH}
        for name, dims in conv.items():
            object.__setattr__(self, name, as_si(getattr(self, name), dims))
        object.__setattr__(self, "spin_pair", tuple(int(x) for x in self.spin_pair))
        object.__setattr__(self, "mitigation",
                           tuple((str(n), float(s)) for n, s in self.mitigation))
        object.__setattr__(self, "dephasing",
                           tuple((str(n), as_si(r, FREQUENCY)) for n, r in self.dephasing))
        if self.mass <= 0:
            raise ConfigError("mass must be > 0")
        for name in ("tau", "t1", "coherence_time", "shield_z"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.gradient < 0 or self.dipole_p < 0:
            raise ConfigError("gradient and dipole moment must be >= 0")
        if self.ratio_threshold <= 0 or self.confidence_z <= 0:
            raise ConfigError("ratio_threshold and confidence_z must be > 0")
        if any(r < 0 for _, r in self.dephasing):
            raise ConfigError("dephasing rates must be >= 0")


@dataclass(frozen=True)
class Constraint:
    name: str
    passed: bool
    measured: float
    bound: float
    informational: bool = False

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "measured": self.measured,
                "bound": self.bound, "informational": self.informational}


@dataclass(frozen=True)
class FeasibilityReport:
    phi_grav: float
    phi_dip: float
    negativity: float
    witness: float
    runs_required: Optional[int]
    background_ratio_after_mitigation: float
    superposition_achieved: float
    dp_rate: float
    constraints: tuple
    notes: tuple = ()

    @property
    def entangled(self) -> bool:
        return self.negativity > ENTANGLED_TOL

    @property
    def feasible(self) -> bool:
        return all(c.passed for c in self.constraints if not c.informational)

    @property
    def n_failed(self) -> int:
        return sum(1 for c in self.constraints if not c.informational and not c.passed)

    def constraint(self, name: str) -> Constraint:
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "phi_grav": self.phi_grav,
            "phi_dip": self.phi_dip,
            "negativity": self.negativity,
            "entangled": self.entangled,
            "witness": self.witness,
            "runs_required": self.runs_required,
            "background_ratio_after_mitigation": self.background_ratio_after_mitigation,
            "superposition_achieved": self.superposition_achieved,
            "dp_rate": self.dp_rate,
            "feasible": self.feasible,
            "constraints": [c.as_dict() for c in self.constraints],
            "notes": list(self.notes),
        }


def total_dephasing(rates) -> float:
    """Sum of named dephasing rates (1/s)."""
    if isinstance(rates, dict):
        rates = rates.items()
    total = 0.0
    for name, r in rates:
        r = as_si(r, FREQUENCY)
        if r < 0:
            raise ValueError(f"negative dephasing rate for {name!r}")
        total += r
    return total


def achievable_separation(config: ExperimentConfig) -> float:
    """Maximum free-flight separation when the sequence fills the coherence time."""
    spec = sg.splitting_from_pair(config.spin_pair, config.gradient, config.mass, config.g_factor)
    seq = sg.free_flight_sequence(config.coherence_time / 4)
    return sg.max_separation(sg.simulate_branches(spec, seq, n_samples=5))


def evaluate(config: ExperimentConfig) -> FeasibilityReport:
    geom = config.geometry
    grav = ent.gravitational_phases(config.mass, config.tau, ent.pairwise_distances(geom))
    mit = bg.mitigation_apply(1.0, config.mitigation)
    dip = bg.dipole_phases(config.dipole_p, geom, config.tau, config.dipole_kappa)
    # mitigation suppresses the interaction energy, hence its phases
    dip = dip.scaled(mit.suppression)
    gamma = total_dephasing(config.dephasing)

    state = ent.assemble_state(grav + dip)
    state = ent.apply_dephasing(state, ent.DephasingModel(gamma, gamma, config.tau))
    neg = ent.negativity(state)
    W = ent.witness_value(state, optimize_frames=True)
    runs = ent.runs_required(W, config.confidence_z) if ent.certifies(W) else None

    raw_ratio = bg.dipole_gravity_ratio_fp(config.mass, geom.d,
                                           bg.DipoleSpec(config.dipole_p, config.dipole_kappa))
    ratio = raw_ratio * mit.suppression
    achieved = achievable_separation(config)
    dp = bg.dp_collapse_rate(config.mass)

    constraints = [
        Constraint("coherence", 4 * config.t1 <= config.coherence_time,
                   4 * config.t1, config.coherence_time),
        Constraint("background_ratio", ratio < config.ratio_threshold,
                   ratio, config.ratio_threshold),
        Constraint("superposition_size", achieved >= geom.dx, achieved, geom.dx),
        Constraint("witness", ent.certifies(W), W, 1.0),
        Constraint("dp_collapse", dp * config.tau < 1, dp * config.tau, 1.0, informational=True),
    ]
    if config.shield_enabled:
        image = bg.image_dipole_force(config.dipole_p, config.shield_z)
        gravity = CONSTANTS.G * config.mass ** 2 / geom.d ** 2
        shield_ratio = image / gravity
        constraints.append(Constraint("shield_image_dipole", shield_ratio < config.ratio_threshold,
                                      shield_ratio, config.ratio_threshold, informational=True))

    notes = [bg.DP_ASSUMPTION]
    if config.ratio_threshold == DEFAULT_RATIO_THRESHOLD:
        notes.append("ratio_threshold 0.1 is a declared default; no residual "
                     "EM-to-gravity ratio has been established")
    return FeasibilityReport(
        phi_grav=ent.entangling_phase(grav),
        phi_dip=ent.entangling_phase(dip),
        negativity=neg,
        witness=W,
        runs_required=runs,
        background_ratio_after_mitigation=ratio,
        superposition_achieved=achieved,
        dp_rate=dp,
        constraints=tuple(constraints),
        notes=tuple(notes),
    )


# -- parameter paths ---------------------------------------------------------

# dotted path -> (ExperimentConfig attribute, dims); paths mirror the config file keys
_SCALAR_PATHS = {
    "mass": ("mass", MASS),
    "tau": ("tau", TIME),
    "t1": ("t1", TIME),
    "gradient": ("gradient", FIELD_GRADIENT),
    "g_factor": ("g_factor", None),
    "coherence_time": ("coherence_time", TIME),
    "ratio_threshold": ("ratio_threshold", None),
    "confidence_z": ("confidence_z", None),
    "dipole.p": ("dipole_p", DIPOLE),
    "dipole.kappa": ("dipole_kappa", None),
    "shield.z": ("shield_z", LENGTH),
}
_GEOMETRY_PATHS = {"geometry.d": "d", "geometry.dx": "dx"}


def check_path(path: str) -> None:
    if path in _SCALAR_PATHS or path in _GEOMETRY_PATHS:
        return
    head, _, name = path.partition(".")
    if head in ("dephasing", "mitigation") and name:
        return
    raise ConfigError(f"unknown parameter path {path!r}")


def path_dims(path: str):
    check_path(path)
    if path in _SCALAR_PATHS:
        return _SCALAR_PATHS[path][1]
    if path in _GEOMETRY_PATHS:
        return LENGTH
    return FREQUENCY if path.startswith("dephasing.") else None


def set_param(config: ExperimentConfig, path: str, value: float) -> ExperimentConfig:
    """Copy of ``config`` with the parameter at ``path`` set to ``value`` (SI)."""
    check_path(path)
    value = float(value)
    if path in _SCALAR_PATHS:
        return replace(config, **{_SCALAR_PATHS[path][0]: value})
    if path in _GEOMETRY_PATHS:
        return replace(config, geometry=replace(config.geometry, **{_GEOMETRY_PATHS[path]: value}))
    head, _, name = path.partition(".")
    items = dict(getattr(config, head))
    items[name] = value
    return replace(config, **{head: tuple(items.items())})


def get_param(config: ExperimentConfig, path: str) -> float:
    check_path(path)
    if path in _SCALAR_PATHS:
        return getattr(config, _SCALAR_PATHS[path][0])
    if path in _GEOMETRY_PATHS:
        return getattr(config.geometry, _GEOMETRY_PATHS[path])
    head, _, name = path.partition(".")
    return dict(getattr(config, head)).get(name, 0.0 if head == "dephasing" else 1.0)


# -- scan --------------------------------------------------------------------

@dataclass(frozen=True)
class Axis:
    path: str
    values: tuple
    log: bool = False

    def __post_init__(self):
        check_path(self.path)
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ConfigError(f"axis {self.path!r} has no values")
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError(f"axis {self.path!r} has non-finite values")
        if self.log and min(vals) <= 0:
            raise ConfigError(f"log axis {self.path!r} needs positive values")
        object.__setattr__(self, "values", vals)

    @classmethod
    def linspace(cls, path: str, start: float, stop: float, num: int) -> "Axis":
        return cls(path, tuple(np.linspace(start, stop, num).tolist()))

    @classmethod
    def logspace(cls, path: str, start: float, stop: float, num: int) -> "Axis":
        vals = np.exp(np.linspace(math.log(start), math.log(stop), num))
        # pin the endpoints against exp/log round-off
        vals[0], vals[-1] = start, stop
        return cls(path, tuple(vals.tolist()), log=True)

    @property
    def bounds(self) -> tuple[float, float]:
        return min(self.values), max(self.values)


@dataclass(frozen=True)
class ScanSpec:
    axes: tuple
    objective: str = "witness_margin"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.axes:
            raise ConfigError("scan needs at least one axis")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}")
        paths = [a.path for a in self.axes]
        if len(set(paths)) != len(paths):
            raise ConfigError("duplicate scan axis")

    def grid(self):
        """Grid points in lexicographic order, last axis varying fastest."""
        return itertools.product(*(a.values for a in self.axes))


@dataclass(frozen=True)
class ScanRow:
    params: tuple   # ((path, value), ...)
    report: FeasibilityReport


def _configure(base: ExperimentConfig, paths: Sequence[str], point: Sequence[float]):
    cfg = base
    for p, v in zip(paths, point):
        cfg = set_param(cfg, p, v)
    return cfg


def _evaluate_point(args):
    base, paths, point = args
    return evaluate(_configure(base, paths, point))


def scan(spec: ScanSpec, base: ExperimentConfig, workers: int = 1) -> list[ScanRow]:
    """Evaluate every grid point; row order is fixed by grid index."""
    paths = [a.path for a in spec.axes]
    points = list(spec.grid())
    jobs = [(base, paths, pt) for pt in points]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_evaluate_point, jobs,
                                    chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        reports = [_evaluate_point(j) for j in jobs]
    return [ScanRow(tuple(zip(paths, pt)), r) for pt, r in zip(points, reports)]


SCAN_COLUMNS = ("phi_grav", "phi_dip", "negativity", "witness", "runs", "ratio", "pass")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_scan_csv(rows: Sequence[ScanRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\r\n")
    if not rows:
        return
    w.writerow([p for p, _ in rows[0].params] + list(SCAN_COLUMNS))
    for row in rows:
        r = row.report
        w.writerow([_fmt(v) for _, v in row.params] + [
            _fmt(r.phi_grav), _fmt(r.phi_dip), _fmt(r.negativity), _fmt(r.witness),
            _fmt(r.runs_required), _fmt(r.background_ratio_after_mitigation), _fmt(r.feasible)])


# -- optimise ----------------------------------------------------------------

def objective_value(report: FeasibilityReport, objective: str) -> float:
    """Objective to maximise; runs_required is mapped to -log10(runs)."""
    if objective == "witness_margin":
        return report.witness - 1.0
    if objective == "negativity":
        return report.negativity
    if objective == "runs_required":
        return -math.log10(report.runs_required) if report.runs_required else -math.inf
    raise ConfigError(f"unknown objective {objective!r}")


def score(report: FeasibilityReport, objective: str) -> float:
    """Objective with a fixed penalty per failed constraint."""
    v = objective_value(report, objective)
    if not math.isfinite(v):
        v = -100.0
    return v - FAIL_PENALTY * report.n_failed


@dataclass(frozen=True)
class OptimizeResult:
    config: ExperimentConfig
    report: FeasibilityReport
    params: tuple
    objective: float
    score: float
    grid_best_score: float
    n_evaluations: int
    all_infeasible: bool


class _Box:
    """Maps unit-cube coordinates to axis values (log-spaced where requested)."""

    def __init__(self, axes: Sequence[Axis]):
        self.axes = list(axes)
        self.lo = np.array([math.log(a.bounds[0]) if a.log else a.bounds[0] for a in axes])
        self.hi = np.array([math.log(a.bounds[1]) if a.log else a.bounds[1] for a in axes])

    def to_values(self, u: np.ndarray) -> list[float]:
        u = np.clip(u, 0.0, 1.0)
        out = []
        for a, lo, hi, ui in zip(self.axes, self.lo, self.hi, u):
            x = lo + ui * (hi - lo)
            x = math.exp(x) if a.log else x
            out.append(float(min(max(x, a.bounds[0]), a.bounds[1])))
        return out

    def to_unit(self, values: Sequence[float]) -> np.ndarray:
        u = []
        for a, lo, hi, v in zip(self.axes, self.lo, self.hi, values):
            x = math.log(v) if a.log else v
            u.append(0.0 if hi == lo else (x - lo) / (hi - lo))
        return np.array(u)


def optimize(spec: ScanSpec, base: ExperimentConfig, workers: int = 1,
             max_iter: int = 2000) -> OptimizeResult:
    """Grid seeding followed by bounded Nelder-Mead refinement.

    The box is spanned by each axis' value range. Refinement runs in unit
    coordinates with coefficients (1, 2, 0.5, 0.5) and stops once the simplex
    is smaller than 1e-6 of the box. The result is never worse than the
    best grid point.
    """
    rows = scan(spec, base, workers=workers)
    grid_scores = [score(r.report, spec.objective) for r in rows]
    best = int(np.argmax(grid_scores))
    paths = [a.path for a in spec.axes]
    box = _Box(spec.axes)
    n = len(spec.axes)
    n_evals = len(rows)

    def neg_score(u):
        nonlocal n_evals
        n_evals += 1
        try:
            rep = evaluate(_configure(base, paths, box.to_values(u)))
        except (QgemError, ValueError):
            return -INVALID_SCORE
        return -score(rep, spec.objective)

    rng = np.random.default_rng(spec.seed)
    u0 = box.to_unit([v for _, v in rows[best].params])
    simplex = [u0]
    for i, a in enumerate(spec.axes):
        step = 0.5 / max(len(a.values) - 1, 1) * (0.75 + 0.5 * rng.random())
        vertex = u0.copy()
        vertex[i] = u0[i] + step if u0[i] + step <= 1.0 else u0[i] - step
        simplex.append(vertex)
    res = minimize(neg_score, u0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * n,
                   options={"initial_simplex": np.array(simplex), "xatol": 1e-6,
                            "fatol": np.inf, "maxiter": max_iter, "adaptive": False})

    values = box.to_values(res.x)
    cfg = _configure(base, paths, values)
    try:
        rep = evaluate(cfg)
        s = score(rep, spec.objective)
    except (QgemError, ValueError):
        s = INVALID_SCORE
    if s < grid_scores[best]:
        values = [v for _, v in rows[best].params]
        cfg = _configure(base, paths, values)
        rep, s = rows[best].report, grid_scores[best]
    return OptimizeResult(
        config=cfg, report=rep, params=tuple(zip(paths, values)),
        objective=objective_value(rep, spec.objective), score=s,
        grid_best_score=grid_scores[best], n_evaluations=n_evals,
        all_infeasible=not any(r.report.feasible for r in rows) and not rep.feasible)
