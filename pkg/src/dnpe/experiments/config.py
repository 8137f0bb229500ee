"""Experiment configuration: schema, validation, sweeps and TOML echo.

A configuration is a TOML document with a fixed set of tables; every key has
a type and a default, so the parsed form is a fully populated nested dict.
Errors carry the line of the offending key.
"""
from __future__ import annotations

import copy
import math
import re
import sys
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..elliptic import SolverSettings
from ..errors import ConfigError
from ..grid import Field, build_grid
from ..nonlinearities import BetaSpec, FluxSpec, SourceSpec, validate_regime
from ..operators import ModelParams
from ..stepper import SchemeConfig

__all__ = ["ExperimentConfig", "SCENARIOS", "parse_config", "load_config", "apply_overrides",
           "expand_sweep", "to_toml", "bump_profile"]

SCENARIOS = ("evolve", "extinction", "blowup", "stabilization", "contraction", "comparison",
             "convergence", "accretivity")

REQUIRED = object()

# table -> key -> (kind, default); kind is one of float, int, bool, str,
# "floats" (list of numbers), "ints", "radius" ("auto", "none" or a number)
# and "num?" (optional number)
SCHEMA = {
    "": {
        "scenario": ("str", REQUIRED),
        "seed": ("int", 0),
        "output_dir": ("str", None),
    },
    "grid": {"a": ("float", 0.0), "b": ("float", 1.0), "n": ("int", 64)},
    "model": {"p": ("float", REQUIRED), "q": ("float", 2.0), "s": ("float", 0.5),
              "mu": ("float", 1.0)},
    "beta": {"m": ("float", 1.0)},
    "flux": {"kind": ("str", "zero"), "gamma": ("float", 1.0), "coefficient": ("float", 1.0),
             "odd": ("bool", False), "radius": ("num?", None)},
    "source": {"kind": ("str", "zero"), "r": ("num?", None), "coefficient": ("float", 1.0),
               "value": ("float", 0.0), "profile": ("str", "flat"), "amplitude": ("float", 1.0),
               "center": ("num?", None), "width": ("num?", None)},
    "scheme": {"T": ("float", REQUIRED), "N": ("int", 1000), "R": ("radius", "auto"),
               "quad_points": ("int", 4), "adaptive": ("bool", False),
               "blowup_threshold": ("num?", None), "extinction_threshold": ("float", 1e-10),
               "growth_factor": ("float", 1.5), "max_halvings": ("int", 40),
               "implicit_source": ("bool", False)},
    "solver": {"inner_tol": ("float", 1e-10), "fp_tol": ("float", 1e-8),
               "max_inner": ("int", 200), "max_outer": ("int", 200), "theta": ("float", 1.0)},
    "initial": {"kind": ("str", "bump"), "amplitude": ("float", 1.0), "center": ("num?", None),
                "width": ("num?", None), "value": ("float", 0.0), "values": ("floats", None)},
    "checks": {"tol": ("float", 1e-8), "k": ("float", 1.0),
               "levels": ("ints", [250, 500, 1000]), "ratio_max": ("float", 0.8),
               "trials": ("int", 1000), "amplitudes": ("floats", [1.0, 2.0, 4.0]),
               "partner_scale": ("float", 0.5), "source_shift": ("float", 0.1),
               "pairs": ("int", 1), "monotone_tol": ("float", 1e-8),
               "l1_tol": ("float", 1e-3), "residual_factor": ("float", 10.0),
               "C": ("float", 1.0)},
    "sweep": {"key": ("str", None), "values": ("list", None)},
}

_CHOICES = {
    ("", "scenario"): SCENARIOS,
    ("flux", "kind"): ("zero", "power"),
    ("source", "kind"): ("zero", "power", "constant", "linear"),
    ("source", "profile"): ("flat", "bump"),
    ("initial", "kind"): ("bump", "constant", "nodes"),
}


def _key_lines(text):
    """Map dotted keys (and table names) to 1-based line numbers."""
    lines, table = {}, ""
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.\-]+)\s*\]$", line)
        if m:
            table = m.group(1)
            lines.setdefault(table, no)
            continue
        m = re.match(r"^([A-Za-z0-9_.\-\"]+)\s*=", line)
        if m:
            key = m.group(1).strip('"')
            lines.setdefault(f"{table}.{key}" if table else key, no)
    return lines


def _where(lines, dotted):
    no = lines.get(dotted) or lines.get(dotted.split(".")[0])
    return f"line {no}: " if no else ""


def _coerce(kind, value):
    """Return the coerced value or raise TypeError with a short reason."""
    if value is None:
        return None
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError("expected a number")
        return float(value)
    if kind == "num?":
        return _coerce("float", value)
    if kind == "int":
        if isinstance(value, bool) or not (isinstance(value, int)
                                           or (isinstance(value, float) and value.is_integer())):
            raise TypeError("expected an integer")
        return int(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise TypeError("expected true or false")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise TypeError("expected a string")
        return value
    if kind == "radius":
        if isinstance(value, str):
            if value.lower() not in ("auto", "none"):
                raise TypeError("expected 'auto', 'none' or a positive number")
            return value.lower()
        return _coerce("float", value)
    if kind in ("floats", "ints"):
        if not isinstance(value, list):
            raise TypeError("expected a list")
        return [_coerce(kind[:-1] if kind == "ints" else "float", v) for v in value]
    if kind == "list":
        if not isinstance(value, list) or not value:
            raise TypeError("expected a nonempty list")
        return list(value)
    raise AssertionError(kind)


@dataclass
class ExperimentConfig:
    """Fully populated configuration (nested dict keyed like the TOML)."""

    data: dict
    warnings: list = field(default_factory=list, compare=False)

    def __getitem__(self, dotted):
        table, _, key = dotted.rpartition(".")
        return self.data[table][key] if table else self.data[""][key]

    @property
    def scenario(self) -> str:
        return self.data[""]["scenario"]

    @property
    def seed(self) -> int:
        return self.data[""]["seed"]

    @property
    def output_dir(self) -> str:
        return self.data[""]["output_dir"] or f"runs/{self.scenario}"

    @property
    def sweep(self) -> Optional[dict]:
        sw = self.data.get("sweep")
        return sw if sw and sw.get("key") else None

    @property
    def checks(self) -> dict:
        return self.data["checks"]

    def grid(self):
        g = self.data["grid"]
        return build_grid(g["a"], g["b"], g["n"])

    def model_params(self, grid=None) -> ModelParams:
        d = self.data
        grid = grid or self.grid()
        fl = d["flux"]
        if fl["kind"] == "zero":
            flux = FluxSpec("zero")
        else:
            flux = FluxSpec("power", gamma=fl["gamma"], coefficient=fl["coefficient"],
                            odd=fl["odd"], radius=fl["radius"])
        return ModelParams(d["model"]["p"], d["model"]["q"], d["model"]["s"], d["model"]["mu"],
                           BetaSpec(d["beta"]["m"]), flux, self.source_spec(grid), grid)

    def source_spec(self, grid) -> SourceSpec:
        src = self.data["source"]
        kind = src["kind"]
        if kind == "zero":
            return SourceSpec("zero")
        if kind == "power":
            return SourceSpec("power", r=src["r"])
        if kind == "linear":
            c = src["coefficient"]
            return SourceSpec("lipschitz_table", func=_Linear(c), lipschitz=abs(c))
        if src["profile"] == "bump":
            values = bump_profile(grid, src["amplitude"], src["center"], src["width"])
        else:
            values = np.full(grid.n, src["value"])
        return SourceSpec("constant_in_u", value=values)

    def scheme(self, **changes) -> SchemeConfig:
        s = dict(self.data["scheme"])
        s.update(changes)
        R = s["R"]
        R = None if R == "none" else R
        return SchemeConfig(T=s["T"], N=s["N"], R=R, quad_points=s["quad_points"],
                            adaptive=s["adaptive"], blowup_threshold=s["blowup_threshold"],
                            extinction_threshold=s["extinction_threshold"],
                            growth_factor=s["growth_factor"], max_halvings=s["max_halvings"],
                            implicit_source=s["implicit_source"], solver=self.solver())

    def solver(self) -> SolverSettings:
        return SolverSettings(**self.data["solver"])

    def initial_field(self, grid=None, scale: float = 1.0) -> Field:
        grid = grid or self.grid()
        ini = self.data["initial"]
        if ini["kind"] == "bump":
            values = bump_profile(grid, ini["amplitude"], ini["center"], ini["width"])
        elif ini["kind"] == "constant":
            values = np.full(grid.n, ini["value"])
        else:
            values = np.asarray(ini["values"], dtype=float)
        return Field(grid, scale * values)


@dataclass(frozen=True)
class _Linear:
    c: float

    def __call__(self, u):
        return self.c * np.asarray(u, dtype=float)


def bump_profile(grid, amplitude, center=None, width=None) -> np.ndarray:
    """``A exp(1 - 1/(1 - ((x - c)/w)^2))`` on ``|x - c| < w``, zero elsewhere."""
    c = 0.5 * (grid.a + grid.b) if center is None else center
    w = 0.5 * (grid.b - grid.a) if width is None else width
    z = (grid.nodes - c) / w
    out = np.zeros(grid.n)
    inside = np.abs(z) < 1
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return out


def _populate(raw, lines):
    errors = []
    data = {}
    for table, keys in SCHEMA.items():
        section = raw if table == "" else raw.get(table, {})
        if table and not isinstance(section, dict):
            errors.append(f"{_where(lines, table)}[{table}] must be a table")
            section = {}
        out = {}
        for key, (kind, default) in keys.items():
            dotted = f"{table}.{key}" if table else key
            if key in section:
                try:
                    out[key] = _coerce(kind, section[key])
                except TypeError as exc:
                    errors.append(f"{_where(lines, dotted)}{dotted}: {exc}, got {section[key]!r}")
                    out[key] = None if default is REQUIRED else copy.deepcopy(default)
            elif default is REQUIRED:
                errors.append(f"missing required key {dotted}")
                out[key] = None
            else:
                out[key] = copy.deepcopy(default)
            choices = _CHOICES.get((table, key))
            if choices and out[key] is not None and out[key] not in choices:
                errors.append(f"{_where(lines, dotted)}{dotted}: {out[key]!r} is not one of "
                              f"{', '.join(choices)}")
        for key in section:
            if table == "" and key in SCHEMA and isinstance(section[key], dict):
                continue
            if key not in keys:
                dotted = f"{table}.{key}" if table else key
                errors.append(f"{_where(lines, dotted)}unknown key {dotted}")
        data[table] = out
    return data, errors


def _scenario_rules(data, lines):
    errors = []
    sc = data[""]["scenario"]
    src = data["source"]
    if src["kind"] == "power" and src["r"] is None:
        errors.append(f"{_where(lines, 'source.kind')}source.kind = 'power' needs source.r")
    if sc in ("extinction", "blowup") and src["kind"] != "power":
        errors.append(f"{_where(lines, 'source.kind')}scenario {sc!r} requires "
                      f"source.kind = 'power', got {src['kind']!r}")
    if sc == "stabilization" and src["kind"] not in ("constant", "zero"):
        errors.append(f"{_where(lines, 'source.kind')}scenario 'stabilization' requires a "
                      f"u-independent source (source.kind = 'constant')")
    if sc == "convergence" and len(data["checks"]["levels"]) < 3:
        errors.append(f"{_where(lines, 'checks.levels')}checks.levels needs at least three "
                      f"step counts")
    if data["initial"]["kind"] == "nodes":
        vals = data["initial"]["values"]
        if vals is None or len(vals) != data["grid"]["n"]:
            errors.append(f"{_where(lines, 'initial.values')}initial.values must list "
                          f"grid.n = {data['grid']['n']} numbers")
    sw = data["sweep"]
    if sw["key"] is not None:
        if sw["values"] is None:
            errors.append(f"{_where(lines, 'sweep')}sweep.values is required with sweep.key")
        table, _, key = sw["key"].rpartition(".")
        if key not in SCHEMA.get(table, {}) or table == "sweep":
            errors.append(f"{_where(lines, 'sweep.key')}sweep.key {sw['key']!r} is not a "
                          f"configuration key")
    return errors


def _build_checks(cfg, lines):
    """Construct the numerical objects once so bad values surface as config errors."""
    errors = []
    try:
        params = cfg.model_params()
        cfg.scheme()
        cfg.initial_field()
    except (ValueError, TypeError) as exc:
        return [str(exc)], []
    return errors, validate_regime(params, cfg.scenario)


def parse_config(text: str, overrides=()) -> ExperimentConfig:
    """Parse and validate a TOML configuration.

    ``overrides`` are ``"table.key=value"`` strings applied before
    validation.  Regime violations are returned as warnings on the config,
    not as errors.

    Raises
    ------
    ConfigError
        With one line-referenced message per problem.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"TOML syntax error: {exc}"]) from None
    lines = _key_lines(text)
    raw = apply_overrides(raw, overrides)
    data, errors = _populate(raw, lines)
    if not errors:
        errors += _scenario_rules(data, lines)
    if errors:
        raise ConfigError(errors)
    cfg = ExperimentConfig(data)
    errors, warnings = _build_checks(cfg, lines)
    if errors:
        raise ConfigError(errors)
    cfg.warnings = warnings
    return cfg


def load_config(path, overrides=()) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    raw = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError([f"override {item!r} is not of the form key=value"])
        key, value = item.split("=", 1)
        table, _, name = key.strip().rpartition(".")
        target = raw.setdefault(table, {}) if table else raw
        target[name] = _parse_value(value.strip())
    return raw


def _set(data, dotted, value):
    table, _, key = dotted.rpartition(".")
    kind = SCHEMA[table][key][0]
    data[table][key] = _coerce(kind, value)


def expand_sweep(cfg: ExperimentConfig):
    """One ``(label, config)`` per sweep value; each gets its own output subdirectory."""
    sw = cfg.sweep
    if not sw:
        return [("", cfg)]
    out = []
    for value in sw["values"]:
        data = copy.deepcopy(cfg.data)
        _set(data, sw["key"], value)
        data["sweep"] = {"key": None, "values": None}
        label = f"{sw['key']}={value}"
        data[""]["output_dir"] = f"{cfg.output_dir}/{label}"
        sub = ExperimentConfig(data)
        errors, warnings = _build_checks(sub, {})
        if errors:
            raise ConfigError([f"sweep value {label}: {e}" for e in errors])
        sub.warnings = warnings
        out.append((label, sub))
    return out


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot write {type(v).__name__} to TOML")


def to_toml(cfg: ExperimentConfig) -> str:
    """Serialize the populated config; ``None`` values are left out."""
    parts = []
    for key, v in cfg.data[""].items():
        if v is not None:
            parts.append(f"{key} = {_toml_value(v)}")
    for table in SCHEMA:
        if not table:
            continue
        items = [(k, v) for k, v in cfg.data[table].items() if v is not None]
        if not items:
            continue
        parts.append("")
        parts.append(f"[{table}]")
        parts += [f"{k} = {_toml_value(v)}" for k, v in items]
    return "\n".join(parts) + "\n"
