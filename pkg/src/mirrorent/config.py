"""JSON run configuration.

Schema (all SI, rates angular)::

    {
      "cavity_length": 0.01,
      "kappa": 5e5,                 # or "finesse": F  (kappa = pi c / (L F))
      "laser_wavelength": 1.064e-6,
      "laser_power": 0.05,
      "mirror": {"omega": ..., "gamma": ..., "mass": ...},   # both mirrors, or
      "mirror1": {...}, "mirror2": {...},                    # each separately
      "temperature": 0.0,
      "delta_over_omega": 0.8125,   # or "delta" (effective) or "delta0" (bare)
      "sweep":  {"parameter": "delta_over_omega", "start": 0.1, "stop": 2.0,
                 "points": 400, "scale": "lin"},
      "sweep2": {...},              # optional second axis
      "output": {"path": "out.csv", "format": "csv"},
      "options": {"use_analytic": false, "seed": 0}
    }

Sweep parameters are dotted keys into this flat layout ("mirror2.mass",
"temperature", ...). Sweeping "mirror.x" sets x on both mirrors.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidParams
from .model import MirrorMode, PhysicalParams, kappa_from_finesse

SCALAR_KEYS = (
    "cavity_length",
    "kappa",
    "finesse",
    "laser_wavelength",
    "laser_power",
    "temperature",
    "delta",
    "delta0",
    "delta_over_omega",
)
MIRROR_FIELDS = ("omega", "gamma", "mass")
DETUNING_KEYS = ("delta", "delta0", "delta_over_omega")
TOP_KEYS = set(SCALAR_KEYS) | {"mirror", "mirror1", "mirror2", "sweep", "sweep2", "output", "options"}


@dataclass(frozen=True)
class SweepAxis:
    parameter: str
    start: float
    stop: float
    points: int
    scale: str = "lin"

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class OutputSpec:
    path: str | None = None
    format: str = "csv"


@dataclass(frozen=True)
class RunOptions:
    use_analytic: bool = False
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; `raw` keeps the physical part for per-point overrides."""

    raw: dict
    sweep: SweepAxis | None = None
    sweep2: SweepAxis | None = None
    output: OutputSpec = field(default_factory=OutputSpec)
    options: RunOptions = field(default_factory=RunOptions)

    def params(self) -> PhysicalParams:
        return params_from_raw(self.raw)

    def detuning(self):
        return detuning_from_raw(self.raw)


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{where}: expected a finite number, got {value!r}")
    return float(value)


def numeric_keys() -> tuple[str, ...]:
    mirror = tuple(f"{m}.{f}" for m in ("mirror", "mirror1", "mirror2") for f in MIRROR_FIELDS)
    return SCALAR_KEYS + mirror


def _mirror(raw, name) -> MirrorMode:
    block = raw.get(name, raw.get("mirror"))
    if not isinstance(block, dict):
        raise ConfigError(f"missing '{name}' (or shared 'mirror') block")
    unknown = set(block) - set(MIRROR_FIELDS)
    if unknown:
        raise ConfigError(f"{name}: unknown fields {sorted(unknown)}")
    try:
        return MirrorMode(**{f: _number(block[f], f"{name}.{f}") for f in MIRROR_FIELDS})
    except KeyError as exc:
        raise ConfigError(f"{name}: missing field {exc.args[0]}") from None


def params_from_raw(raw: dict) -> PhysicalParams:
    """PhysicalParams without the detuning (see `detuning_from_raw`)."""
    for key in ("cavity_length", "laser_wavelength", "laser_power"):
        if key not in raw:
            raise ConfigError(f"missing '{key}'")
    length = _number(raw["cavity_length"], "cavity_length")
    if ("kappa" in raw) == ("finesse" in raw):
        raise ConfigError("give exactly one of 'kappa' and 'finesse'")
    try:
        kappa = (
            _number(raw["kappa"], "kappa")
            if "kappa" in raw
            else kappa_from_finesse(length, _number(raw["finesse"], "finesse"))
        )
        return PhysicalParams(
            cavity_length=length,
            kappa=kappa,
            laser_wavelength=_number(raw["laser_wavelength"], "laser_wavelength"),
            laser_power=_number(raw["laser_power"], "laser_power"),
            mirror1=_mirror(raw, "mirror1"),
            mirror2=_mirror(raw, "mirror2"),
            temperature=_number(raw.get("temperature", 0.0), "temperature"),
        )
    except InvalidParams as exc:
        raise ConfigError(str(exc)) from exc


def detuning_from_raw(raw: dict) -> tuple[str, float]:
    """("delta" | "delta0", value in rad/s); delta_over_omega scales by mirror 1's Omega."""
    given = [k for k in DETUNING_KEYS if k in raw]
    if len(given) != 1:
        raise ConfigError(f"give exactly one detuning among {DETUNING_KEYS}, got {given}")
    key = given[0]
    value = _number(raw[key], key)
    if key == "delta_over_omega":
        return "delta", value * _mirror(raw, "mirror1").omega
    return key, value


def set_dotted(raw: dict, key: str, value: float) -> dict:
    """Copy of `raw` with one numeric field replaced."""
    if key not in numeric_keys():
        raise ConfigError(f"sweep parameter '{key}' is not a numeric field; choose from {numeric_keys()}")
    out = copy.deepcopy(raw)
    if key in DETUNING_KEYS:
        for k in DETUNING_KEYS:
            out.pop(k, None)
    if key == "kappa":
        out.pop("finesse", None)
    if key == "finesse":
        out.pop("kappa", None)
    if "." not in key:
        out[key] = float(value)
        return out
    block, fld = key.split(".")
    targets = ("mirror1", "mirror2") if block == "mirror" else (block,)
    shared = out.get("mirror")
    for t in targets:
        if t not in out:
            if not isinstance(shared, dict):
                raise ConfigError(f"cannot set '{key}': no '{t}' or 'mirror' block")
            out[t] = dict(shared)
        out[t] = dict(out[t], **{fld: float(value)})
    if block == "mirror":
        out.pop("mirror", None)
    return out


def _axis(block, name) -> SweepAxis:
    if not isinstance(block, dict):
        raise ConfigError(f"'{name}' must be an object")
    try:
        axis = SweepAxis(
            parameter=str(block["parameter"]),
            start=_number(block["start"], f"{name}.start"),
            stop=_number(block["stop"], f"{name}.stop"),
            points=int(block["points"]),
            scale=block.get("scale", "log" if block["parameter"] == "temperature" else "lin"),
        )
    except KeyError as exc:
        raise ConfigError(f"{name}: missing {exc.args[0]}") from None
    if axis.parameter not in numeric_keys():
        raise ConfigError(f"{name}: '{axis.parameter}' is not a numeric field")
    if axis.points < 2:
        raise ConfigError(f"{name}: points must be >= 2")
    if not axis.start < axis.stop:
        raise ConfigError(f"{name}: start must be < stop")
    if axis.scale not in ("lin", "log"):
        raise ConfigError(f"{name}: scale must be 'lin' or 'log'")
    if axis.scale == "log" and axis.start <= 0:
        raise ConfigError(f"{name}: log scale needs start > 0 (use lin to include 0)")
    return axis


def load_config(source) -> RunConfig:
    """Parse a path, JSON string, or dict into a RunConfig (raises ConfigError)."""
    if isinstance(source, dict):
        raw = copy.deepcopy(source)
    else:
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else str(source)
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    sweep = _axis(raw.pop("sweep"), "sweep") if "sweep" in raw else None
    sweep2 = _axis(raw.pop("sweep2"), "sweep2") if "sweep2" in raw else None
    if sweep2 is not None and sweep is None:
        raise ConfigError("sweep2 given without sweep")
    out = raw.pop("output", {}) or {}
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
    opts = raw.pop("options", {}) or {}
    seed = opts.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("options.seed must be an integer")
    cfg = RunConfig(
        raw=raw,
        sweep=sweep,
        sweep2=sweep2,
        output=OutputSpec(out.get("path"), fmt),
        options=RunOptions(bool(opts.get("use_analytic", False)), seed),
    )
    # fail early on the base point; a detuning may come from the sweep axes alone
    cfg.params()
    swept = {a.parameter for a in (sweep, sweep2) if a is not None}
    if not swept & set(DETUNING_KEYS):
        cfg.detuning()
    return cfg
