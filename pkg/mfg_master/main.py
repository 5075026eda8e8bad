#!/usr/bin/env python3
"""
MFG Master Command Line

This module provides the main entry point of the ``mfg-master`` command.
Every sub-command shares the run flags; the process exits 0 when all enabled
assertions pass, 2 when an evaluation budget is exhausted, 3 when a
fixed-point solve does not converge and 1 otherwise.
"""

import sys
import traceback
from pathlib import Path
from typing import List, Optional

import typer
from pydantic import ValidationError

from mfg_master.errors import BudgetExceededError, ConvergenceError, MFGMasterError
from mfg_master.schemas import COMMANDS, RunConfig
from mfg_master.utils.config import get_config_value
from mfg_master.utils.logger import get_logger, setup_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_BUDGET = 2
EXIT_CONVERGENCE = 3

COMMAND_HELP = {
    "solve-mfg": "Solve the MFG system from the initial density and write u and m.",
    "master-first": "Evaluate U, its flat derivative and, on small grids, the master residual.",
    "master-linear": "Evaluate the linear second-order master equation and its semigroup deviation.",
    "split": "Run the N-Cauchy study of the splitting scheme.",
    "major": "Run the major-player scheme agreement, growth and Lipschitz audits.",
    "audit": "Run the Bernstein, stability and duality audits.",
    "convergence": "Run the Fokker-Planck grid-refinement study.",
    "stochastic": "Run the Monte-Carlo consistency check along the common-noise flow.",
}

app = typer.Typer(
    name="mfg-master",
    help="Splitting-method solvers and audits for mean field game master equations.",
    add_completion=False,
    no_args_is_help=True,
)


def parse_int_list(values: Optional[List[str]]) -> Optional[List[int]]:
    """
    Flatten repeated and comma-separated integer options.

    Args:
        values (Optional[List[str]]): Raw option values, e.g. ["1,2", "4"].

    Returns:
        Optional[List[int]]: The integers in order, or None when the option was not given.
    """
    if not values:
        return None
    out: List[int] = []
    for value in values:
        for part in str(value).split(","):
            part = part.strip()
            if part:
                out.append(int(part))
    return out


def execute(config: RunConfig) -> int:
    """
    Run a command and map its outcome to an exit status.

    Args:
        config (RunConfig): Validated run configuration.

    Returns:
        int: The exit status.
    """
    from mfg_master.cli.runner import run_command

    try:
        result = run_command(config)
    except BudgetExceededError as e:
        logger.error(f"{config.command}: {e}")
        return EXIT_BUDGET
    except ConvergenceError as e:
        logger.error(f"{config.command}: {e}")
        return EXIT_CONVERGENCE
    except MFGMasterError as e:
        logger.error(f"{config.command}: {e}")
        return EXIT_FAILED
    except Exception as e:
        logger.error(f"Error running {config.command}: {e}")
        logger.error(traceback.format_exc())
        return EXIT_FAILED
    return EXIT_OK if result.passed else EXIT_FAILED


def _register(command: str) -> None:
    def run(
        scenario: Optional[Path] = typer.Option(None, "--scenario", help="YAML scenario file."),
        n_values: Optional[List[str]] = typer.Option(None, "--N", help="Values of N (repeatable or comma-separated)."),
        grids: Optional[List[str]] = typer.Option(None, "--grid", help="Grid sizes (repeatable or comma-separated)."),
        tol: Optional[float] = typer.Option(None, "--tol", help="Picard tolerance override."),
        budget: Optional[int] = typer.Option(None, "--budget", help="Maximum MFG solves per scheme run."),
        seed: int = typer.Option(0, "--seed", help="Master seed."),
        out: Optional[Path] = typer.Option(None, "--out", help="Output directory (defaults to output.directory)."),
        samples: int = typer.Option(3, "--samples", help="Number of sample densities."),
        paths: int = typer.Option(64, "--paths", help="Common-noise paths of the stochastic check."),
    ) -> None:
        fields = {
            "command": command,
            "scenario": scenario,
            "tol": tol,
            "budget": budget,
            "seed": seed,
            "out": out if out is not None else Path(get_config_value("output_directory", "runs")),
            "samples": samples,
            "paths": paths,
        }
        try:
            parsed_ns = parse_int_list(n_values)
            parsed_grids = parse_int_list(grids)
            if parsed_ns is not None:
                fields["ns"] = parsed_ns
            if parsed_grids is not None:
                fields["grids"] = parsed_grids
            config = RunConfig(**fields)
        except (ValueError, ValidationError) as e:
            logger.error(f"Invalid options for {command}: {e}")
            raise typer.Exit(EXIT_FAILED)
        raise typer.Exit(execute(config))

    app.command(name=command, help=COMMAND_HELP[command])(run)


for _command in COMMANDS:
    _register(_command)


def main() -> None:
    """
    Main entry point of the mfg-master command.
    """
    setup_logger()
    try:
        app()
    except Exception as e:
        logger.error(f"Error running mfg-master: {e}")
        logger.error(traceback.format_exc())
        sys.exit(EXIT_FAILED)


if __name__ == "__main__":
    main()
