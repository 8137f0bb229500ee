import csv
import json

import numpy as np
import pytest

from dnpe.errors import ConfigError
from dnpe.experiments import (emit_outputs, expand_sweep, load_config, parse_config,
                              run_scenario, to_toml)
from dnpe.experiments.cli import main
from dnpe.experiments.config import bump_profile
from dnpe.experiments.reference import REFERENCE, quick_overrides, reference_config

MINIMAL = """
scenario = "evolve"
[model]
p = 3.0
[scheme]
T = 0.1
N = 10
"""

ZERO = """
scenario = "evolve"
output_dir = "zero"
[grid]
n = 16
[model]
p = 3.0
[beta]
m = 2.0
[scheme]
T = 0.1
N = 5
[initial]
kind = "constant"
value = 0.0
"""


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("DNPE_OUTPUT_ROOT", str(tmp_path))
    return tmp_path


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_minimal_config_is_populated():
    cfg = parse_config(MINIMAL)
    assert cfg.scenario == "evolve"
    assert cfg["grid.n"] == 64 and cfg["model.q"] == 2.0 and cfg["beta.m"] == 1.0
    assert cfg["scheme.R"] == "auto" and cfg["solver.fp_tol"] == 1e-8
    assert cfg.output_dir == "runs/evolve"
    assert cfg.grid().n == 64


def test_blowup_with_zero_source_is_rejected():
    text = MINIMAL.replace('"evolve"', '"blowup"')
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert any("requires source.kind = 'power'" in e for e in exc.value.errors)


def test_sweep_over_m_expands_to_three_configs():
    text = MINIMAL + '[sweep]\nkey = "beta.m"\nvalues = [1.25, 1.5, 2]\n'
    points = expand_sweep(parse_config(text))
    assert [label for label, _ in points] == ["beta.m=1.25", "beta.m=1.5", "beta.m=2"]
    assert [c["beta.m"] for _, c in points] == [1.25, 1.5, 2.0]
    assert len({c.output_dir for _, c in points}) == 3
    assert all(c.sweep is None for _, c in points)


def test_errors_carry_line_numbers():
    text = MINIMAL + "[grid]\nn = 8\nbogus = 1\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.errors == ["line 10: unknown key grid.bogus"]
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL.replace("N = 10", 'N = "ten"'))
    assert exc.value.errors[0].startswith("line 7: scheme.N")


@pytest.mark.parametrize("text", [
    "scenario = \"evolve\"\n[scheme]\nT = 1.0\n",
    MINIMAL.replace("p = 3.0", "p = 1.5"),
    MINIMAL + "[flux]\nkind = \"burgers\"\n",
    MINIMAL + "[initial]\nkind = \"nodes\"\nvalues = [1.0, 2.0]\n",
    "scenario = [",
])
def test_invalid_configs_raise(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_regime_violations_are_warnings():
    text = MINIMAL.replace('"evolve"', '"extinction"') + (
        '[source]\nkind = "power"\nr = 3.0\n')
    cfg = parse_config(text)
    assert cfg.warnings


def test_overrides_take_precedence():
    cfg = parse_config(MINIMAL, ["scheme.N=40", "grid.n=12", 'initial.kind="constant"'])
    assert cfg["scheme.N"] == 40 and cfg["grid.n"] == 12 and cfg["initial.kind"] == "constant"
    with pytest.raises(ConfigError):
        parse_config(MINIMAL, ["scheme.N"])


@pytest.mark.parametrize("scenario", sorted(REFERENCE))
def test_echo_round_trip(scenario):
    cfg = parse_config(reference_config(scenario))
    again = parse_config(to_toml(cfg))
    assert again == cfg
    assert to_toml(again) == to_toml(cfg)


def test_bump_profile_support_and_peak():
    cfg = parse_config(MINIMAL, ["grid.n=101"])
    g = cfg.grid()
    v = bump_profile(g, 2.0, 0.5, 0.25)
    assert v.max() == pytest.approx(2.0)
    assert np.all(v[np.abs(g.nodes - 0.5) >= 0.25] == 0)


def test_zero_run_gives_zero_series(output_root):
    cfg = parse_config(ZERO)
    result = run_scenario(cfg)
    assert result.exit_code == 0
    paths = emit_outputs(result, cfg)
    assert {p.name for p in paths} == {"trajectory.csv", "series.csv", "summary.json",
                                       "config.echo.toml"}
    header, rows = read_csv(output_root / "zero" / "series.csv")
    assert header[:4] == ["t", "linf", "l1.5", "J"]
    assert len(rows) == 6
    assert all(float(v) == 0.0 for row in rows for v in row[1:4])
    _, traj = read_csv(output_root / "zero" / "trajectory.csv")
    assert all(float(v) == 0.0 for row in traj for v in row[1:])


def test_trajectory_rows_are_thinned(output_root):
    cfg = parse_config(ZERO, ["scheme.N=450"])
    emit_outputs(run_scenario(cfg), cfg)
    _, rows = read_csv(output_root / "zero" / "trajectory.csv")
    assert len(rows) <= 201
    assert float(rows[0][0]) == 0.0 and float(rows[-1][0]) == pytest.approx(0.1)


def test_blowup_series_stops_at_event(output_root):
    cfg = parse_config(reference_config("blowup"), quick_overrides("blowup"))
    result = run_scenario(cfg)
    emit_outputs(result, cfg)
    summary = json.loads((output_root / "verify" / "blowup" / "summary.json").read_text())
    assert summary["status"].startswith("blown_up(")
    t_event = summary["event_time"]
    _, rows = read_csv(output_root / "verify" / "blowup" / "series.csv")
    assert float(rows[-1][0]) == pytest.approx(t_event)
    assert all(float(r[0]) <= t_event for r in rows)


def test_summary_is_deterministic(output_root):
    cfg = parse_config(ZERO.replace("value = 0.0", "value = 0.3"))
    blobs = []
    for name in ("a", "b"):
        emit_outputs(run_scenario(cfg), cfg, out_dir=name)
        blobs.append((output_root / name / "summary.json").read_bytes())
    assert blobs[0] == blobs[1]


def write_config(tmp_path, text):
    path = tmp_path / "cfg.toml"
    path.write_text(text)
    return str(path)


def test_cli_run_passes(tmp_path, capsys):
    assert main(["run", write_config(tmp_path, ZERO)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
    echo = load_config(tmp_path / "zero" / "config.echo.toml")
    assert echo == parse_config(ZERO)


def test_cli_config_error_exit_code(tmp_path, capsys):
    assert main(["run", write_config(tmp_path, "scenario = \"evolve\"\n")]) == 4
    assert "config error" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.toml")]) == 4
    assert main(["sweep", write_config(tmp_path, ZERO)]) == 4


def test_cli_check_failure_exit_code(tmp_path):
    # an impossible energy tolerance turns the dissipation check red
    path = write_config(tmp_path, ZERO.replace("value = 0.0", "value = 0.3"))
    assert main(["run", path, "--override", "checks.tol=-1"]) == 2


def test_cli_solver_failure_exit_code(tmp_path):
    path = write_config(tmp_path, ZERO.replace("value = 0.0", "value = 0.3"))
    assert main(["run", path, "--override", "solver.max_inner=1",
                 "--override", "solver.inner_tol=1e-16"]) == 3


def test_cli_sweep_layout(tmp_path, output_root):
    text = ZERO + '[sweep]\nkey = "beta.m"\nvalues = [1.25, 2.0]\n'
    assert main(["sweep", write_config(tmp_path, text)]) == 0
    assert (output_root / "zero" / "beta.m=1.25" / "summary.json").exists()
    assert (output_root / "zero" / "beta.m=2.0" / "series.csv").exists()
    header, rows = read_csv(output_root / "zero" / "sweep_summary.csv")
    assert header[:4] == ["label", "value", "status", "exit_code"]
    assert [r[0] for r in rows] == ["beta.m=1.25", "beta.m=2.0"]


@pytest.mark.parametrize("scenario", ["evolve", "comparison", "accretivity"])
def test_cli_verify_quick(scenario, capsys):
    assert main(["verify", scenario, "--quick"]) == 0
    assert "exit 0" in capsys.readouterr().out
