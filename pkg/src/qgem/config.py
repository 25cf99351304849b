"""Strict JSON experiment configs (schema 1).

Physical values are ``"value unit"`` strings; dimensionless values are plain
numbers. Unknown keys are errors.

Defaults:

    geometry.arrangement  linear
    geometry.d            400 um
    geometry.dx           100 um
    tau                   1 s
    t1                    0.25 s
    gradient              1e4 T/m
    coherence_time        1 s
    spin_pair             [1, -1]
    g_factor              2.003
    dipole.p              0 C*m
    dipole.kappa          1
    mitigation            {}      (method -> suppression in (0, 1])
    dephasing             {}      (source -> rate, e.g. "0.1 s^-1")
    ratio_threshold       0.1
    confidence_z          3
    shield.enabled        false
    shield.z              50 um

``mass`` has no default.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Iterable, Union

from .budget import SCHEMA_VERSION, ExperimentConfig
from .entangle import TwoInterferometerGeometry
from .errors import ConfigError, QgemError
from .physcore import (
    DIPOLE,
    FIELD_GRADIENT,
    FREQUENCY,
    LENGTH,
    MASS,
    TIME,
    Quantity,
    format_quantity,
    parse_quantity,
    to_si,
)

DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "geometry": {"arrangement": "linear", "d": "400 um", "dx": "100 um"},
    "tau": "1 s",
    "t1": "0.25 s",
    "gradient": "1e4 T/m",
    "coherence_time": "1 s",
    "spin_pair": [1, -1],
    "g_factor": 2.003,
    "dipole": {"p": "0 C*m", "kappa": 1.0},
    "mitigation": {},
    "dephasing": {},
    "ratio_threshold": 0.1,
    "confidence_z": 3.0,
    "shield": {"enabled": False, "z": "50 um"},
}

# leaf key -> (dims, display unit); dims None means a plain number
_QUANTITY_KEYS = {
    "mass": (MASS, "kg"),
    "tau": (TIME, "s"),
    "t1": (TIME, "s"),
    "gradient": (FIELD_GRADIENT, "T/m"),
    "coherence_time": (TIME, "s"),
    "geometry.d": (LENGTH, "m"),
    "geometry.dx": (LENGTH, "m"),
    "dipole.p": (DIPOLE, "C*m"),
    "shield.z": (LENGTH, "m"),
}
_NUMBER_KEYS = ("g_factor", "dipole.kappa", "ratio_threshold", "confidence_z")
_SECTIONS = {"geometry": ("arrangement", "d", "dx"), "dipole": ("p", "kappa"),
             "shield": ("enabled", "z")}
_TOP = {"schema", "mass", "tau", "t1", "gradient", "coherence_time", "spin_pair", "g_factor",
        "dipole", "mitigation", "dephasing", "ratio_threshold", "confidence_z", "shield",
        "geometry"}


def _quantity(text, key: str, dims) -> float:
    if not isinstance(text, str):
        raise ConfigError(f"{key}: expected a 'value unit' string, got {text!r}")
    try:
        return to_si(parse_quantity(text), dims)
    except QgemError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _number(x, key: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {x!r}")
    return float(x)


def _merged(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if raw.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema {raw.get('schema')!r}; expected {SCHEMA_VERSION}")
    unknown = set(raw) - _TOP
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "mass" not in raw:
        raise ConfigError("mass is required")
    data = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be an object")
            bad = set(value) - set(_SECTIONS[key])
            if bad:
                raise ConfigError(f"unknown keys in {key}: {sorted(bad)}")
            data[key].update(value)
        elif key in ("mitigation", "dephasing"):
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be an object of name -> value")
            data[key] = dict(value)
        else:
            data[key] = value
    return data


def config_from_dict(raw: dict) -> ExperimentConfig:
    data = _merged(raw)

    def leaf(path):
        head, _, tail = path.partition(".")
        return data[head][tail] if tail else data[head]

    q = {k: _quantity(leaf(k), k, dims) for k, (dims, _) in _QUANTITY_KEYS.items()}
    n = {k: _number(leaf(k), k) for k in _NUMBER_KEYS}
    pair = data["spin_pair"]
    if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(x, int) for x in pair)):
        raise ConfigError(f"spin_pair must be a list of two integers, got {pair!r}")
    if not isinstance(data["shield"]["enabled"], bool):
        raise ConfigError("shield.enabled must be true or false")
    mitigation = tuple((str(k), _number(v, f"mitigation.{k}"))
                       for k, v in data["mitigation"].items())
    dephasing = tuple((str(k), _quantity(v, f"dephasing.{k}", FREQUENCY))
                      for k, v in data["dephasing"].items())
    try:
        geom = TwoInterferometerGeometry(data["geometry"]["arrangement"],
                                         q["geometry.d"], q["geometry.dx"])
        return ExperimentConfig(
            mass=q["mass"], geometry=geom, tau=q["tau"], t1=q["t1"], gradient=q["gradient"],
            spin_pair=tuple(pair), g_factor=n["g_factor"], dipole_p=q["dipole.p"],
            dipole_kappa=n["dipole.kappa"], mitigation=mitigation, dephasing=dephasing,
            coherence_time=q["coherence_time"], ratio_threshold=n["ratio_threshold"],
            shield_enabled=data["shield"]["enabled"], shield_z=q["shield.z"],
            confidence_z=n["confidence_z"])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: Union[str, Path], overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Read a schema-1 JSON config, apply ``--set`` overrides, and validate."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(apply_overrides(raw, overrides))


def apply_overrides(raw: dict, overrides: Iterable[str]) -> dict:
    """Apply ``dotted.path=value`` strings to a raw config dict."""
    raw = copy.deepcopy(raw)
    for item in overrides:
        path, sep, value = item.partition("=")
        path = path.strip()
        if not sep or not path:
            raise ConfigError(f"override must look like path=value, got {item!r}")
        value = value.strip()
        head, _, tail = path.partition(".")
        if head in _SECTIONS:
            if tail not in _SECTIONS[head]:
                raise ConfigError(f"unknown parameter path {path!r}")
            raw.setdefault(head, {})[tail] = _override_value(path, value)
        elif head in ("mitigation", "dephasing") and tail:
            raw.setdefault(head, {})[tail] = _override_value(path, value)
        elif head in _TOP and not tail and head not in ("schema", "mitigation", "dephasing"):
            raw[head] = _override_value(path, value)
        else:
            raise ConfigError(f"unknown parameter path {path!r}")
    return raw


def _override_value(path: str, value: str):
    if path == "spin_pair":
        try:
            return [int(x) for x in value.split(",")]
        except ValueError as exc:
            raise ConfigError(f"spin_pair: {exc}") from exc
    if path == "shield.enabled":
        if value.lower() not in ("true", "false"):
            raise ConfigError("shield.enabled must be true or false")
        return value.lower() == "true"
    if path == "geometry.arrangement":
        return value
    if path in _NUMBER_KEYS or path.startswith("mitigation."):
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return value


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Canonical schema-1 dict; `config_from_dict` reads it back exactly."""
    def fq(value, key):
        dims, unit = _QUANTITY_KEYS[key]
        return format_quantity(Quantity(value, dims), unit)

    return {
        "schema": SCHEMA_VERSION,
        "mass": fq(cfg.mass, "mass"),
        "geometry": {"arrangement": cfg.geometry.arrangement,
                     "d": fq(cfg.geometry.d, "geometry.d"),
                     "dx": fq(cfg.geometry.dx, "geometry.dx")},
        "tau": fq(cfg.tau, "tau"),
        "t1": fq(cfg.t1, "t1"),
        "gradient": fq(cfg.gradient, "gradient"),
        "coherence_time": fq(cfg.coherence_time, "coherence_time"),
        "spin_pair": list(cfg.spin_pair),
        "g_factor": cfg.g_factor,
        "dipole": {"p": fq(cfg.dipole_p, "dipole.p"), "kappa": cfg.dipole_kappa},
        "mitigation": {k: v for k, v in cfg.mitigation},
        "dephasing": {k: format_quantity(Quantity(v, FREQUENCY), "s^-1")
                      for k, v in cfg.dephasing},
        "ratio_threshold": cfg.ratio_threshold,
        "confidence_z": cfg.confidence_z,
        "shield": {"enabled": cfg.shield_enabled, "z": fq(cfg.shield_z, "shield.z")},
    }


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"


__all__ = ["DEFAULTS", "load_config", "config_from_dict", "config_to_dict", "dump_config",
           "apply_overrides"]
