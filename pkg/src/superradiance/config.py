"""Scenario files and built-in presets, plus the run record written next to outputs.

Scenarios are TOML documents. ``SCHEMA`` lists every field with its unit and
default (rendered into the README). Internal units are gamma = 1 and
hbar omega0 = 1; the optional SI fields only add rescaled output columns.
"""
from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .ablation import PRESETS as ABLATION_PRESETS
from .angular import HalfInt, half
from .doppler import CONVENTIONS
from .integrate import StepperConfig

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "MarginalConfig",
    "OutputConfig",
    "Scenario",
    "SweepSpec",
    "RunRecord",
    "PRESETS",
    "load",
    "loads",
    "dumps",
    "scenario_hash",
    "preset",
]

SCHEMA_VERSION = 1
MODES = ("dicke", "twobody", "doppler")
FORMATS = ("csv", "json", "csv+json")


class ConfigError(ValueError):
    """Schema violation; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# (key, unit, default, description); the README table is generated from this
SCHEMA = [
    ("name", "-", "'scenario'", "label used for output file names"),
    ("mode", "-", "required", "one of dicke, twobody, doppler"),
    ("j", "-", "required", "single-particle spin, e.g. '1/2' or '9/2'"),
    ("N", "-", "10", "number of emitters (dicke mode only)"),
    ("C", "-", "10.0", "cooperativity 2 pi c^3 n / omega^3, >= 0"),
    ("rho_size", "-", "10.0", "size parameter omega d / 2c, > 0"),
    ("gamma_SI", "1/s", "unset", "free-space rate; adds t_s and I_em_W columns"),
    ("omega0_SI", "rad/s", "unset", "level spacing; needed with gamma_SI for I_em_W"),
    ("Delta_D", "gamma", "0.0", "Doppler width; 0 disables broadening"),
    ("quad_order", "-", "40", "Gauss-Hermite nodes for the thermal average"),
    ("doppler_convention", "-", "'printed'", "printed or consistent (see README)"),
    ("ablation_preset", "-", "'full'", "one of " + ", ".join(ABLATION_PRESETS)),
    ("t_end", "1/gamma", "1.0", "final time"),
    ("n_out", "-", "2001", "number of output samples on [0, t_end]"),
    ("eps_stop", "-", "1e-6", "stop once the excited population A drops below this"),
    ("integrator.rel_tol", "-", "1e-9", "relative local error tolerance"),
    ("integrator.abs_tol", "-", "1e-12", "absolute local error tolerance"),
    ("integrator.dt_init", "1/gamma", "1e-6", "first trial step"),
    ("integrator.dt_max", "1/gamma", "inf", "largest step"),
    ("integrator.dt_min", "1/gamma", "1e-12", "step underflow threshold"),
    ("integrator.rate_change_cap", "-", "0.05", "max relative change of Gamma per step"),
    ("integrator.max_steps", "-", "2000000", "step budget"),
    ("output.path", "-", "'.'", "output directory (relative to --out)"),
    ("output.format", "-", "'csv+json'", "csv, json or csv+json"),
    ("marginal.bracket", "gamma", "[100.0, 5000.0]", "Delta_D search interval"),
    ("marginal.eps_peak", "-", "1e-3", "peak must exceed I_em(0) (1 + eps_peak)"),
    ("marginal.rel_tol", "-", "5e-3", "bisection stops at hi/lo < 1 + rel_tol"),
    ("marginal.t_end", "1/gamma", "5.0", "trajectory horizon per bisection step"),
    ("sweep.<field>", "-", "unset", "list of values; cells are the Cartesian product"),
    ("sweep.zip", "-", "false", "walk the axes in lockstep instead"),
]


@dataclass(frozen=True)
class MarginalConfig:
    bracket: tuple = (100.0, 5000.0)
    eps_peak: float = 1e-3
    rel_tol: float = 5e-3
    t_end: float = 5.0

    def __post_init__(self):
        lo, hi = self.bracket
        if not 0 < lo < hi:
            raise ConfigError("marginal.bracket", "needs 0 < lo < hi")
        if not self.eps_peak > 0:
            raise ConfigError("marginal.eps_peak", "must be > 0")
        if not self.rel_tol > 0:
            raise ConfigError("marginal.rel_tol", "must be > 0")
        if not self.t_end > 0:
            raise ConfigError("marginal.t_end", "must be > 0")


@dataclass(frozen=True)
class OutputConfig:
    path: str = "."
    format: str = "csv+json"

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigError("output.format", f"must be one of {FORMATS}, got {self.format!r}")


@dataclass(frozen=True)
class Scenario:
    mode: str
    j: HalfInt
    name: str = "scenario"
    N: int = 10
    C: float = 10.0
    rho_size: float = 10.0
    gamma_SI: Optional[float] = None
    omega0_SI: Optional[float] = None
    Delta_D: float = 0.0
    quad_order: int = 40
    doppler_convention: str = "printed"
    ablation_preset: str = "full"
    t_end: float = 1.0
    n_out: int = 2001
    eps_stop: float = 1e-6
    integrator: StepperConfig = field(default_factory=StepperConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    marginal: Optional[MarginalConfig] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError("mode", f"must be one of {MODES}, got {self.mode!r}")
        if not isinstance(self.j, HalfInt):
            raise ConfigError("j", "must be a HalfInt")
        if self.j.twice < 1:
            raise ConfigError("j", "must be >= 1/2")
        if not (np.isfinite(self.C) and self.C >= 0):
            raise ConfigError("C", f"must be finite and >= 0, got {self.C}")
        if not (np.isfinite(self.rho_size) and self.rho_size > 0):
            raise ConfigError("rho_size", f"must be finite and > 0, got {self.rho_size}")
        if not (np.isfinite(self.Delta_D) and self.Delta_D >= 0):
            raise ConfigError("Delta_D", f"must be finite and >= 0, got {self.Delta_D}")
        for name in ("gamma_SI", "omega0_SI"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v > 0):
                raise ConfigError(name, f"must be > 0 when set, got {v}")
        if self.mode == "dicke" and self.N < 1:
            raise ConfigError("N", f"must be >= 1, got {self.N}")
        if self.mode == "twobody" and self.Delta_D != 0:
            raise ConfigError("Delta_D", "twobody mode is unbroadened; use mode = 'doppler'")
        if self.mode == "doppler" and self.Delta_D == 0 and self.marginal is None:
            raise ConfigError("Delta_D", "doppler mode needs Delta_D > 0 or a [marginal] table")
        if self.quad_order < 8:
            raise ConfigError("quad_order", "must be >= 8")
        if self.doppler_convention not in CONVENTIONS:
            raise ConfigError("doppler_convention", f"must be one of {CONVENTIONS}")
        if self.ablation_preset not in ABLATION_PRESETS:
            raise ConfigError("ablation_preset", f"must be one of {tuple(ABLATION_PRESETS)}")
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError("t_end", f"must be finite and > 0, got {self.t_end}")
        if self.n_out < 2:
            raise ConfigError("n_out", "must be >= 2")
        if not self.eps_stop >= 0:
            raise ConfigError("eps_stop", "must be >= 0")

    def replace(self, **changes) -> "Scenario":
        if "j" in changes:
            changes["j"] = half(changes["j"])
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        """Plain TOML-serialisable form; unset optionals are omitted."""
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "j":
                v = str(v)
            elif f.name == "integrator":
                v = dataclasses.asdict(v)
            elif f.name in ("output", "marginal"):
                v = dataclasses.asdict(v)
                if "bracket" in v:
                    v["bracket"] = list(v["bracket"])
            out[f.name] = v
        return out


@dataclass(frozen=True)
class SweepSpec:
    """A base scenario and named axes.

    Cells are the Cartesian product in axis order (last axis fastest), or with
    ``zipped`` the axes are walked in lockstep.
    """

    base: Scenario
    axes: dict
    zipped: bool = False

    def __post_init__(self):
        if self.zipped and len({len(v) for v in self.axes.values()}) > 1:
            raise ConfigError("sweep.zip", "zipped axes must have equal lengths")

    def combos(self) -> list[dict]:
        if not self.axes:
            return []
        names = list(self.axes)
        values = zip(*self.axes.values()) if self.zipped else itertools.product(*self.axes.values())
        return [dict(zip(names, combo)) for combo in values]

    def cells(self) -> list[Scenario]:
        out = []
        for combo in self.combos():
            try:
                out.append(self.base.replace(**combo))
            except ConfigError as exc:
                raise ConfigError(f"sweep.{exc.field}", str(exc).split(": ", 1)[1]) from exc
        return out

    def to_dict(self) -> dict:
        d = self.base.to_dict()
        d["sweep"] = {k: [str(v) if isinstance(v, HalfInt) else v for v in vals]
                      for k, vals in self.axes.items()}
        if self.zipped:
            d["sweep"]["zip"] = True
        return d


_TOP = {f.name for f in dataclasses.fields(Scenario)}
_NESTED = {"integrator": StepperConfig, "output": OutputConfig, "marginal": MarginalConfig}


def _coerce(name: str, value, kind):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(name, f"expected a string, got {value!r}")
        return value
    return value


_KINDS = {
    "name": str, "mode": str, "N": int, "C": float, "rho_size": float, "gamma_SI": float,
    "omega0_SI": float, "Delta_D": float, "quad_order": int, "doppler_convention": str,
    "ablation_preset": str, "t_end": float, "n_out": int, "eps_stop": float,
}


def _parse_j(value, name="j") -> HalfInt:
    try:
        return half(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, f"not a half-integer: {value!r}") from exc


def _nested(name: str, table) -> Any:
    cls = _NESTED[name]
    if not isinstance(table, dict):
        raise ConfigError(name, "expected a table")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for k, v in table.items():
        if k not in known:
            raise ConfigError(f"{name}.{k}", "unknown key")
        default = known[k].default
        if isinstance(default, tuple):
            if not isinstance(v, list) or len(v) != 2:
                raise ConfigError(f"{name}.{k}", "expected a two-element list")
            v = tuple(_coerce(f"{name}.{k}", x, float) for x in v)
        elif isinstance(default, bool):
            pass
        elif isinstance(default, int):
            v = _coerce(f"{name}.{k}", v, int)
        elif isinstance(default, float):
            v = _coerce(f"{name}.{k}", v, float)
        elif isinstance(default, str):
            v = _coerce(f"{name}.{k}", v, str)
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        msg = str(exc)
        field_name = msg.split(".", 1)[1].split(" ", 1)[0] if msg.startswith(cls.__name__ + ".") else "?"
        raise ConfigError(f"{name}.{field_name}", msg) from exc


def from_dict(data: dict):
    """Build a Scenario, or a SweepSpec when a ``sweep`` table is present."""
    data = dict(data)
    sweep = data.pop("sweep", None)
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version}")
    for req in ("mode", "j"):
        if req not in data:
            raise ConfigError(req, "missing required field")
    kwargs: dict[str, Any] = {}
    for k, v in data.items():
        if k not in _TOP:
            raise ConfigError(k, "unknown key")
        if k == "j":
            kwargs[k] = _parse_j(v)
        elif k in _NESTED:
            kwargs[k] = _nested(k, v)
        else:
            kwargs[k] = _coerce(k, v, _KINDS[k])
    base = Scenario(**kwargs)
    if sweep is None:
        return base
    if not isinstance(sweep, dict):
        raise ConfigError("sweep", "expected a table of lists")
    sweep = dict(sweep)
    zipped = sweep.pop("zip", False)
    if not isinstance(zipped, bool):
        raise ConfigError("sweep.zip", "expected true or false")
    axes = {}
    for k, vals in sweep.items():
        if k not in _KINDS and k != "j":
            raise ConfigError(f"sweep.{k}", "not a sweepable scalar field")
        if not isinstance(vals, list):
            raise ConfigError(f"sweep.{k}", "expected a list")
        if k == "j":
            axes[k] = [_parse_j(v, "sweep.j") for v in vals]
        else:
            axes[k] = [_coerce(f"sweep.{k}", v, _KINDS[k]) for v in vals]
    spec = SweepSpec(base, axes, zipped)
    spec.cells()  # validates every cell with sweep context
    return spec


def loads(text: str):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"TOML syntax error: {exc}") from exc
    return from_dict(data)


def load(path):
    return loads(Path(path).read_text())


def dumps(obj) -> str:
    d = obj.to_dict()
    return tomli_w.dumps({"schema_version": SCHEMA_VERSION, **d})


def scenario_hash(obj) -> str:
    """SHA-256 of the canonical JSON form; output location is excluded."""
    d = obj.to_dict()
    d.pop("output", None)
    canon = json.dumps(d, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(canon.encode()).hexdigest()


def _json_default(x):
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    raise TypeError(f"cannot serialise {x!r}")


@dataclass
class RunRecord:
    scenario_hash: str
    code_version: str
    wall_time: float
    summary: dict

    def summary_json(self) -> str:
        """Deterministic summary document (no wall time)."""
        doc = {
            "schema_version": SCHEMA_VERSION,
            "scenario_hash": self.scenario_hash,
            "code_version": self.code_version,
            "summary": self.summary,
        }
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True)

    def record_json(self) -> str:
        doc = dataclasses.asdict(self)
        doc["schema_version"] = SCHEMA_VERSION
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True)


# Presets. "lics" maps the LiCs vibrational ladder onto ten levels; the sample
# size is our own choice (rho_size = 50, d ~ 0.95 mm at omega0 = 2 pi x 5 THz).
_PRESET_TEXT = {
    "fig2b": """
name = "fig2b"
mode = "dicke"
j = "1/2"
N = 10
t_end = 2.0
n_out = 4001
[sweep]
j = ["1/2", "1", "3/2", "2", "5/2", "3", "7/2", "4", "9/2"]
""",
    "fig2c": """
name = "fig2c"
mode = "dicke"
j = "1/2"
N = 30
t_end = 8.0
n_out = 8001
[sweep]
zip = true
j = ["1/2", "3/2", "15/2"]
N = [30, 10, 2]
""",
    "fig3a": """
name = "fig3a"
mode = "twobody"
j = "1/2"
C = 10.0
rho_size = 10.0
t_end = 0.05
n_out = 2001
[sweep]
j = ["1/2", "1", "3/2", "2", "5/2", "3", "7/2", "4", "9/2"]
""",
    "fig4": """
name = "fig4"
mode = "twobody"
j = "1"
C = 10.0
rho_size = 10.0
t_end = 0.05
n_out = 2001
[sweep]
j = ["1/2", "1", "9/2"]
ablation_preset = ["full", "no-offdiag", "same-level", "same+cross", "same+cross+higher"]
""",
    "fig6": """
name = "fig6"
mode = "doppler"
j = "1/2"
C = 10.0
rho_size = 10.0
Delta_D = 433.0
t_end = 2.0
n_out = 2001
[sweep]
j = ["1/2", "9/2"]
[marginal]
bracket = [100.0, 5000.0]
""",
    "fig5": """
name = "fig5"
mode = "doppler"
j = "1/2"
C = 10.0
rho_size = 10.0
[sweep]
C = [5.0, 7.0, 10.0, 14.0, 20.0]
[marginal]
bracket = [20.0, 5000.0]
""",
    "lics": """
name = "lics"
mode = "twobody"
j = "9/2"
C = 20.0
rho_size = 50.0
gamma_SI = 1.0
omega0_SI = 3.1415926535897932e13
t_end = 0.01
n_out = 2001
""",
}

PRESETS = {name: loads(text) for name, text in _PRESET_TEXT.items()}


def preset(name: str):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
