"""
Command-line plumbing: scenario files, run orchestration and artifacts.
"""

from mfg_master.cli.artifacts import SCHEMA_VERSION, write_csv, write_json
from mfg_master.cli.runner import COMMAND_RUNNERS, RunResult, resolve_scenario, run_command, sample_densities
from mfg_master.cli.scenarios import (
    build_scenario,
    default_scenario,
    load_scenario,
    load_scenario_model,
    parse_scenario,
    save_scenario,
)

__all__ = [
    "SCHEMA_VERSION",
    "write_csv",
    "write_json",
    "COMMAND_RUNNERS",
    "RunResult",
    "resolve_scenario",
    "run_command",
    "sample_densities",
    "build_scenario",
    "default_scenario",
    "load_scenario",
    "load_scenario_model",
    "parse_scenario",
    "save_scenario",
]
