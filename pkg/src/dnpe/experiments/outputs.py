"""CSV/JSON/TOML files written for every scenario run."""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from ..errors import UnsupportedFunctionalError
from ..grid import lp_norm
from ..operators import energy_E, energy_J
from .config import ExperimentConfig, to_toml
from .scenarios import ScenarioResult

__all__ = ["emit_outputs", "resolve_output_dir", "write_sweep_summary", "summary_dict",
           "MAX_TRAJECTORY_ROWS"]

MAX_TRAJECTORY_ROWS = 200
OUTPUT_ROOT_ENV = "DNPE_OUTPUT_ROOT"


def resolve_output_dir(path) -> Path:
    """Relative paths are taken under ``$DNPE_OUTPUT_ROOT`` when it is set."""
    p = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        p = Path(root) / p
    return p


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def summary_dict(result: ScenarioResult, cfg: ExperimentConfig) -> dict:
    rep = result.report.as_dict()
    return _clean({
        "scenario": result.scenario,
        "status": result.status,
        "event_time": result.event_time,
        "exit_code": result.exit_code,
        "passed": result.exit_code == 0,
        "solver_failure": result.solver_failure,
        "seed": cfg.seed,
        "checks": rep["checks"],
        "extras": rep["extras"],
        "warnings": result.warnings,
    })


def _series_rows(result: ScenarioResult):
    traj, params = result.trajectory, result.params
    gamma = 1.0 + params.beta.holder_alpha
    extra = result.series_extra.get("stationary_residual")
    header = ["t", "linf", f"l{gamma:g}", "J", "E"] + (["stationary_residual"] if extra is not None else [])
    rows = []
    for i, (t, u) in enumerate(zip(traj.times, traj.levels)):
        try:
            E = energy_E(u, params)
        except UnsupportedFunctionalError:
            E = ""
        row = [t, float(np.abs(u.values).max()), lp_norm(u, gamma), energy_J(u, params), E]
        if extra is not None:
            row.append(extra[i])
        rows.append(row)
    return header, rows


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating, int)) else v


def emit_outputs(result: ScenarioResult, cfg: ExperimentConfig, out_dir=None) -> list:
    """Write trajectory.csv, series.csv, summary.json and config.echo.toml.

    Returns the written paths.  Trajectory rows are thinned to at most
    ``MAX_TRAJECTORY_ROWS`` (first and last level always kept).
    """
    out = resolve_output_dir(out_dir or cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    traj = result.trajectory
    if traj is not None:
        n_lev = len(traj.levels)
        stride = max(1, math.ceil(n_lev / MAX_TRAJECTORY_ROWS))
        keep = list(range(0, n_lev, stride))
        if keep[-1] != n_lev - 1:
            keep.append(n_lev - 1)
        path = out / "trajectory.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x={x:.6g}" for x in traj.levels[0].grid.nodes])
            for i in keep:
                w.writerow([_fmt(traj.times[i])] + [_fmt(v) for v in traj.levels[i].values])
        written.append(path)
        header, rows = _series_rows(result)
        path = out / "series.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        written.append(path)
    path = out / "summary.json"
    with open(path, "w") as fh:
        json.dump(summary_dict(result, cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    path = out / "config.echo.toml"
    path.write_text(to_toml(cfg))
    written.append(path)
    return written


def write_sweep_summary(rows, out_dir) -> Path:
    """``rows``: (label, value, ScenarioResult) triples."""
    out = resolve_output_dir(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for _, _, res in rows:
        for c in res.report.checks:
            if c.name not in names:
                names.append(c.name)
    path = out / "sweep_summary.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "value", "status", "exit_code"] + names)
        for label, value, res in rows:
            measured = {c.name: c.measured for c in res.report.checks}
            w.writerow([label, value, res.status, res.exit_code]
                       + [_fmt(measured[n]) if n in measured else "" for n in names])
    return path
