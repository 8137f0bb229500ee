"""Command line front end: ``dnpe run|verify|sweep``."""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor

from ..errors import ConfigError
from .config import SCENARIOS, expand_sweep, load_config, parse_config
from .outputs import emit_outputs, write_sweep_summary
from .reference import quick_overrides, reference_config
from .scenarios import EXIT_CHECK, EXIT_CONFIG, EXIT_PASS, run_scenario

__all__ = ["main", "build_parser"]


def build_parser():
    ap = argparse.ArgumentParser(prog="dnpe", description=(
        "Implicit-Euler solver and property checks for doubly nonlinear parabolic equations "
        "with mixed local/nonlocal diffusion."))
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one configured scenario")
    run.add_argument("config", help="TOML configuration file")
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                     help="override a configuration key, e.g. scheme.N=500 (repeatable)")
    ver = sub.add_parser("verify", help="run a built-in reference scenario")
    ver.add_argument("scenario", choices=SCENARIOS)
    ver.add_argument("--quick", action="store_true", help="smaller grids and fewer steps")
    ver.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    sw = sub.add_parser("sweep", help="run every point of the config's [sweep] axis")
    sw.add_argument("config")
    sw.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    sw.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    return ap


def _report(cfg, result, out=None):
    out = out or sys.stdout
    for w in result.warnings:
        print(f"WARNING regime: {w}", file=out)
    for line in result.lines():
        print(line, file=out)
    if result.solver_failure:
        print(f"FAIL solver: {result.solver_failure}", file=out)
    print(f"status {result.status}; exit {result.exit_code}", file=out)


def _run_one(cfg):
    result = run_scenario(cfg)
    emit_outputs(result, cfg)
    return result


def _sweep(cfg, workers):
    points = expand_sweep(cfg)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, [c for _, c in points]))
    else:
        results = [_run_one(c) for _, c in points]
    rows = [(label, label.split("=", 1)[1], res) for (label, _), res in zip(points, results)]
    write_sweep_summary(rows, cfg.output_dir)
    for (label, _), res in zip(points, results):
        print(f"== {label}")
        _report(cfg, res)
    codes = [r.exit_code for r in results]
    return max(codes) if codes else EXIT_PASS


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            extra = quick_overrides(args.scenario) if args.quick else []
            cfg = parse_config(reference_config(args.scenario), extra + args.override)
        else:
            cfg = load_config(args.config, args.override)
        if args.command == "sweep":
            if not cfg.sweep:
                raise ConfigError(["the configuration has no [sweep] table"])
            return _sweep(cfg, args.workers)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = _run_one(cfg)
    _report(cfg, result)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
