"""
Run Orchestration Module

This module runs one command of the command line against a scenario and
writes its artifacts under ``<out>/<command>/``. Every command returns a
report and the list of its enabled assertions; the run succeeds iff all of
them pass.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from mfg_master import __version__
from mfg_master.cli.artifacts import cauchy_table_rows, trajectory_rows, write_csv, write_json
from mfg_master.cli.scenarios import default_scenario, load_scenario
from mfg_master.errors import BudgetExceededError
from mfg_master.major import (
    MajorScheme,
    joint_norm_growth,
    major_agreement,
    major_lipschitz_audit,
    pair_distance,
    terminal_pair,
)
from mfg_master.major.scheme import MajorPair
from mfg_master.master import (
    delta_u_delta_m,
    eval_linear_master,
    eval_u,
    lipschitz_in_m_audit,
    master_residual_via_flow,
    semigroup_check,
)
from mfg_master.measures.grid import GridDensity, GridFunction, smooth_random_density
from mfg_master.mfg import Scenario, solve_mfg
from mfg_master.mfg.audits import duality_audit, flow_consistency_gap, stability_audit
from mfg_master.pde.audits import (
    STEP_MASS_TOLERANCE,
    bernstein_audit,
    gaussian_spreading_study,
    step_mass_drift,
)
from mfg_master.schemas import RunConfig
from mfg_master.splitting import SplittingScheme, convergence_study, stochastic_consistency
from mfg_master.utils.config import get_config_value
from mfg_master.utils.logger import get_logger
from mfg_master.utils.rng import task_rng

logger = get_logger(__name__)

FLOW_TOLERANCE = 1e-5


@dataclass
class RunResult:
    """
    Outcome of one command.

    Attributes:
        report (Dict[str, Any]): JSON-able report body.
        assertions (Dict[str, bool]): Enabled assertions by name.
        artifacts (List[Path]): Files written.
    """

    report: Dict[str, Any] = field(default_factory=dict)
    assertions: Dict[str, bool] = field(default_factory=dict)
    artifacts: List[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.assertions.values())


def sample_densities(scenario: Scenario, count: int, seed: int) -> List[GridDensity]:
    """The scenario's initial density followed by ``count - 1`` smooth random densities."""
    samples = [scenario.initial_density]
    for index in range(1, count):
        samples.append(smooth_random_density(scenario.grid, task_rng(seed, f"samples/{index}")))
    return samples


def _budget(config: RunConfig) -> int:
    return int(config.budget if config.budget is not None else get_config_value("evaluation_budget", 200000))


def _output_dir(config: RunConfig) -> Path:
    path = Path(config.out) / config.command
    path.mkdir(parents=True, exist_ok=True)
    return path


def _metadata(scenario: Scenario, config: RunConfig) -> List[str]:
    return [
        f"mfg-master {__version__}",
        f"scenario {scenario.name}, n = {scenario.grid.cells}, T = {scenario.horizon}, a0 = {scenario.common_noise}",
        f"seed {config.seed}",
    ]


def _run_solve_mfg(scenario: Scenario, config: RunConfig, out: Path) -> RunResult:
    solution = solve_mfg(scenario, 0.0, scenario.initial_density)
    mesh = solution.mesh
    gap = flow_consistency_gap(solution, mesh.steps // 2)
    meta = _metadata(scenario, config)
    result = RunResult()
    result.artifacts.append(
        write_csv(
            out / "value.csv",
            ["t", "x", "value"],
            trajectory_rows(mesh.times, scenario.grid.nodes, solution.u.snapshots),
            meta + ["value: u(t, x), the value function of the MFG system"],
        )
    )
    result.artifacts.append(
        write_csv(
            out / "density.csv",
            ["t", "x", "value"],
            trajectory_rows(mesh.times, scenario.grid.nodes, solution.m.snapshots),
            meta + ["value: m(t, x), the population density"],
        )
    )
    masses = scenario.grid.spacing * np.sum(solution.m.snapshots, axis=1)
    mass_deviation = float(np.max(np.abs(masses - 1.0)))
    mass_drift = step_mass_drift(scenario.grid.spacing, solution.m.snapshots)
    result.report = {
        "iterations": solution.iterations,
        "final_gap": solution.final_gap,
        "flow_consistency_gap": gap,
        "max_mass_deviation": mass_deviation,
        "max_mass_step_drift": mass_drift,
    }
    result.assertions = {
        "flow_consistency": gap <= FLOW_TOLERANCE,
        "mass_conservation": mass_drift <= STEP_MASS_TOLERANCE,
    }
    return result


def _run_master_first(scenario: Scenario, config: RunConfig, out: Path) -> RunResult:
    grid = scenario.grid
    samples = sample_densities(scenario, max(2, config.samples), config.seed)
    m0 = samples[0]
    u = eval_u(scenario, 0.0, 0.0, m0)
    derivative = delta_u_delta_m(scenario, 0.0, 0.0, m0, samples[1].values)
    meta = _metadata(scenario, config)
    result = RunResult()
    result.artifacts.append(
        write_csv(
            out / "master.csv",
            ["x", "u", "dudm"],
            [[float(x), float(u.values[i]), float(derivative.values[i])] for i, x in enumerate(grid.nodes)],
            meta + ["u: U(0, 0, x, m0); dudm: dU/dm(0, 0, x, m0)(m1), normalized"],
        )
    )
    result.report = {"sup_u": u.sup_norm(), "sup_dudm": float(np.max(np.abs(derivative.values)))}
    pairs = [(samples[0], other) for other in samples[1:]]
    if grid.cells <= int(get_config_value("residual_max_cells", 32)):
        result.report["residual"] = master_residual_via_flow(scenario, 0.0, 0.0, m0)
        audit = lipschitz_in_m_audit(scenario, 0.0, 0.0, pairs)
        result.report["lipschitz_in_m"] = audit
        result.assertions["lipschitz_in_m"] = audit["holds"]
    else:
        logger.warning(
            f"Skipping the master residual and Lipschitz audit on {grid.cells} cells; "
            f"each needs a full measure-derivative sweep (raise runtime.residual_max_cells to run them)"
        )
    return result


def _run_master_linear(scenario: Scenario, config: RunConfig, out: Path) -> RunResult:
    a0 = scenario.common_noise
    horizon = scenario.horizon
    samples = sample_densities(scenario, config.samples, config.seed)
    values = [eval_linear_master(scenario.terminal, horizon, m, a0).values for m in samples]
    deviation = semigroup_check(scenario.terminal, horizon / 3.0, 2.0 * horizon / 3.0, a0, samples)
    result = RunResult()
    result.artifacts.append(
        write_csv(
            out / "linear_master.csv",
            ["sample", "x", "value"],
            [[s, float(x), float(v[i])] for s, v in enumerate(values) for i, x in enumerate(scenario.grid.nodes)],
            _metadata(scenario, config) + [f"value: U(T, x, m_sample) of the linear master equation with a0 = {a0}"],
        )
    )
    result.report = {"semigroup_deviation": deviation, "samples": len(samples)}
    return result


def _run_split(scenario: Scenario, config: RunConfig, out: Path) -> RunResult:
    samples = sample_densities(scenario, config.samples, config.seed)
    table = convergence_study(scenario, config.ns, samples, budget=config.budget)
    result = RunResult()
    result.artifacts.append(
        write_csv(
            out / "cauchy.csv",
            ["N", "E_N", "order"],
            cauchy_table_rows(table),
            _metadata(scenario, config) + ["E_N: sup |U^N(0) - U^N_prev(0)| over samples and x; order: observed rate"],
        )
    )
    result.report = {"cauchy": table}
    if not table["complete"]:
        result.artifacts.append(write_json(out / "report.json", _report_body(config, result)))
        raise BudgetExceededError(_budget(config), partial=table)
    return result


def _run_major(scenario: Scenario, config: RunConfig, out: Path) -> RunResult:
    samples = sample_densities(scenario, max(2, config.samples), config.seed)
    table = major_agreement(scenario, config.ns, samples, budget=config.budget)
    result = RunResult()
    result.artifacts.append(
        write_csv(
            out / "major_cauchy.csv",
            ["N", "E_N", "order"],
            cauchy_table_rows(table),
            _metadata(scenario, config) + ["E_N: joint norm of the pair difference over samples"],
        )
    )
    result.report = {"cauchy": table}
    if not table["complete"]:
        result.artifacts.append(write_json(out / "report.json", _report_body(config, result)))
        raise BudgetExceededError(_budget(config), partial=table)
    scheme = MajorScheme(scenario, config.ns[0], config.budget)
    m0 = samples[0]
    u0, u = terminal_pair(scheme.scenario, m0)
    terminal_gap = pair_distance(scheme.evaluate(scheme.schedule.last, m0), MajorPair(u0=u0, u=u))
    result.report["terminal_gap"] = terminal_gap
    durations = [scenario.horizon / 4.0, scenario.horizon / 2.0, scenario.horizon]
    result.report["growth"] = joint_norm_growth(scenario, m0, durations)
    result.report["lipschitz"] = major_lipschitz_audit(scheme, samples)
    result.assertions["terminal_exactness"] = terminal_gap == 0.0
    return result


def _run_audit(scenario: Scenario, config: RunConfig, out: Path) -> RunResult:
    grid = scenario.grid
    samples = sample_densities(scenario, 2, config.seed)
    solution = solve_mfg(scenario, 0.0, samples[0])
    terminal = GridFunction(grid, scenario.terminal.evaluate(solution.terminal_density()))
    rho0 = samples[1].values - samples[0].values
    result = RunResult()
    result.report = {
        "bernstein": bernstein_audit(solution.u, terminal),
        "stability": stability_audit(scenario, samples[0], samples[1]),
        "duality": duality_audit(solution, rho0),
    }
    return result


def _run_convergence(scenario: Scenario, config: RunConfig, out: Path) -> RunResult:
    rows = gaussian_spreading_study(config.grids, length=scenario.grid.length)
    result = RunResult()
    result.artifacts.append(
        write_csv(
            out / "fp_refinement.csv",
            ["cells", "error", "order"],
            [[row["cells"], row["error"], row.get("order")] for row in rows],
            _metadata(scenario, config) + ["error: sup |m - exact| of the heat flow of a wrapped Gaussian"],
        )
    )
    result.report = {"rows": rows}
    result.assertions = {
        "mass_conservation": all(
            row["max_mass_step_drift"] <= STEP_MASS_TOLERANCE for row in rows
        ),
        "positivity": all(row["min_value"] >= 0.0 for row in rows),
    }
    return result


def _run_stochastic(scenario: Scenario, config: RunConfig, out: Path) -> RunResult:
    scheme = SplittingScheme(scenario, config.ns[0], config.budget)
    checkpoints = scheme.schedule.checkpoints
    step = scenario.horizon / scheme.schedule.last

    def master(t: float, m: GridDensity) -> np.ndarray:
        return scheme.evaluate(int(round(t / step)), m)

    report = stochastic_consistency(scenario, master, scenario.initial_density, config.paths, config.seed, times=checkpoints)
    result = RunResult()
    result.report = {"stochastic": report, "counters": scheme.counters()}
    return result


COMMAND_RUNNERS: Dict[str, Callable[[Scenario, RunConfig, Path], RunResult]] = {
    "solve-mfg": _run_solve_mfg,
    "master-first": _run_master_first,
    "master-linear": _run_master_linear,
    "split": _run_split,
    "major": _run_major,
    "audit": _run_audit,
    "convergence": _run_convergence,
    "stochastic": _run_stochastic,
}


def _report_body(config: RunConfig, result: RunResult) -> Dict[str, Any]:
    return {
        "command": config.command,
        "seed": config.seed,
        "version": __version__,
        "scenario": str(config.scenario) if config.scenario else "default",
        "assertions": result.assertions,
        "passed": result.passed,
        **result.report,
    }


def resolve_scenario(config: RunConfig) -> Scenario:
    """Load the configured scenario and apply the tolerance override."""
    scenario = load_scenario(config.scenario) if config.scenario else default_scenario()
    if config.tol is not None:
        scenario = scenario.with_fixed_point(tol=config.tol)
    return scenario


def run_command(config: RunConfig, scenario: Optional[Scenario] = None) -> RunResult:
    """
    Run one command and write its artifacts.

    Args:
        config (RunConfig): Validated run configuration.
        scenario (Optional[Scenario]): Scenario override (loaded from the config when omitted).

    Returns:
        RunResult: Report, assertions and written files.

    Raises:
        BudgetExceededError: After writing partial artifacts, when a scheme exceeds its budget.
        ConvergenceError: When a fixed-point solve does not converge.
    """
    scenario = scenario if scenario is not None else resolve_scenario(config)
    out = _output_dir(config)
    logger.info(f"Running {config.command} on scenario '{scenario.name}' into {out}")
    result = COMMAND_RUNNERS[config.command](scenario, config, out)
    result.artifacts.append(write_json(out / "report.json", _report_body(config, result)))
    failed = [name for name, ok in result.assertions.items() if not ok]
    if failed:
        logger.warning(f"{config.command}: failed assertions {failed}")
    return result
