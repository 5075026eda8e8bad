"""
Scenario Files Module

This module provides loading, saving and construction of scenarios from
YAML scenario files validated by :mod:`mfg_master.schemas`.
"""

from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from pydantic import ValidationError

from mfg_master.errors import ScenarioError
from mfg_master.measures.grid import GridDensity, TorusGrid
from mfg_master.mfg.functionals import CatalogScalarTerminal, CatalogTerminal, CatalogTerminalForm
from mfg_master.mfg.scenario import FixedPointConfig, Scenario
from mfg_master.pde.hamiltonian import CatalogHamiltonian, FourierKernel
from mfg_master.pde.mesh import DiffusionField
from mfg_master.schemas import DensityModel, HamiltonianModel, ScenarioModel, TerminalModel
from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)


def _key_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ())) or "<root>"


def parse_scenario(data: Optional[Dict[str, Any]]) -> ScenarioModel:
    """
    Validate raw scenario data.

    Raises:
        ScenarioError: With the key path of the first offending entry.
    """
    if data is not None and not isinstance(data, dict):
        raise ScenarioError("<root>", f"a scenario file must hold a mapping, got {type(data).__name__}")
    try:
        return ScenarioModel.model_validate(data or {})
    except ValidationError as e:
        first = e.errors()[0]
        message = str(first.get("msg", "invalid value")).removeprefix("Value error, ")
        raise ScenarioError(_key_path(first), message) from e


def load_scenario_model(path: Union[str, Path]) -> ScenarioModel:
    """
    Read and validate a scenario file.

    Raises:
        ScenarioError: If the file is missing, is not YAML, or fails validation.
    """
    path = Path(path)
    if not path.exists():
        raise ScenarioError(str(path), "scenario file not found")
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ScenarioError(str(path), f"not a valid YAML document: {e}") from e
    return parse_scenario(data)


def _hamiltonian(model: HamiltonianModel, length: float) -> CatalogHamiltonian:
    return CatalogHamiltonian(
        kappa=model.kappa,
        beta=model.beta,
        c0=model.c0,
        c2=model.c2,
        alpha=model.alpha,
        psi=FourierKernel.of(model.psi),
        phi=FourierKernel.of(model.phi),
        length=length,
        growth_c0=model.growth_c0,
        growth_gamma=model.growth_gamma,
    )


def _terminal_form(model: TerminalModel, length: float) -> CatalogTerminalForm:
    return CatalogTerminalForm(
        base=FourierKernel.of(model.base),
        gamma=model.gamma,
        a=model.a,
        b=model.b,
        psi=FourierKernel.of(model.psi),
        e=model.e,
        q=model.q,
        eta=FourierKernel.of(model.eta),
        delta=model.delta,
        length=length,
    )


def _density(model: DensityModel, grid: TorusGrid) -> GridDensity:
    if model.kind == "uniform":
        return GridDensity.uniform(grid)
    if model.kind == "wrapped_gaussian":
        return GridDensity.wrapped_gaussian(grid, model.center, model.variance)
    return GridDensity.von_mises(grid, model.center, model.concentration)


def build_scenario(model: ScenarioModel) -> Scenario:
    """
    Construct the Scenario described by a validated model.

    The major Hamiltonian never carries the x0 coupling term.
    """
    grid = TorusGrid(model.grid.length, model.grid.cells)
    major_grid = TorusGrid(model.major_grid.length, model.major_grid.cells)
    return Scenario(
        grid=grid,
        horizon=model.horizon,
        time_step=model.horizon / model.time_steps,
        diffusion=DiffusionField(model.diffusion.base, model.diffusion.amplitude, model.diffusion.frequency),
        common_noise=model.common_noise,
        major_grid=major_grid,
        hamiltonian=_hamiltonian(model.hamiltonian, grid.length),
        major_hamiltonian=_hamiltonian(model.major_hamiltonian, major_grid.length).without_x0_coupling(),
        terminal=CatalogTerminal(grid, _terminal_form(model.terminal, grid.length)),
        major_terminal=CatalogScalarTerminal(_terminal_form(model.major_terminal, major_grid.length)),
        initial_density=_density(model.initial_density, grid),
        fixed_point=FixedPointConfig(
            damping=model.fixed_point.damping,
            tol=model.fixed_point.tol,
            max_iter=model.fixed_point.max_iter,
        ),
        gradient=model.gradient,
        cfl_limit=model.cfl_limit,
        name=model.name,
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    """
    Load a scenario file into a Scenario.

    Args:
        path (Union[str, Path]): YAML scenario file.

    Returns:
        Scenario: The constructed scenario.

    Raises:
        ScenarioError: On schema errors or breached model assumptions, with the key path.
    """
    model = load_scenario_model(path)
    logger.info(f"Loaded scenario '{model.name}' from {path}")
    return build_scenario(model)


def default_scenario() -> Scenario:
    """The default catalog scenario (n = 64, T = 0.25, a0 = 0)."""
    return build_scenario(ScenarioModel())


def save_scenario(model: ScenarioModel, path: Union[str, Path]) -> Path:
    """
    Write a scenario model as YAML.

    Returns:
        Path: The written file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = model.model_dump(mode="json")
    with open(path, "w") as f:
        yaml.safe_dump(data, f, sort_keys=True)
    return path
