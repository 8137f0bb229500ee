"""Config-driven scenario runs, sweeps and file output."""
from .config import ExperimentConfig, expand_sweep, load_config, parse_config, to_toml
from .outputs import emit_outputs
from .scenarios import ScenarioResult, run_scenario

__all__ = ["ExperimentConfig", "parse_config", "load_config", "expand_sweep", "to_toml",
           "run_scenario", "ScenarioResult", "emit_outputs"]
