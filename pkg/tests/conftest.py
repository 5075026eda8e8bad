"""
Pytest configuration and fixtures for MFG master tests.

Every test runs against an isolated runtime configuration: CONFIG_FILE_PATH
points at a missing file and the cached configuration is cleared, so the
repository's config.yaml never leaks into a test.

Scenario fixtures are deliberately tiny. Splitting and major-player schemes
recurse over the time grid, so anything beyond N = 2 on 16 cells is slow.
"""

import pytest

from mfg_master.cli.scenarios import build_scenario
from mfg_master.measures.grid import GridDensity, TorusGrid
from mfg_master.schemas import (
    DensityModel,
    FixedPointModel,
    GridModel,
    HamiltonianModel,
    ScenarioModel,
    TerminalModel,
)


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """
    Point the runtime configuration at an empty file and reset its cache.
    """
    import mfg_master.utils.config as config_module

    monkeypatch.setenv("CONFIG_FILE_PATH", str(tmp_path / "missing-config.yaml"))
    monkeypatch.delenv("MFG_SPLIT_THREADS", raising=False)
    config_module._config_cache = None

    yield

    config_module._config_cache = None


def small_model(**changes) -> ScenarioModel:
    """Scenario model on 16 cells with a short horizon; keyword changes override fields."""
    fields = {
        "name": "small",
        "grid": GridModel(cells=16),
        "horizon": 0.1,
        "time_steps": 8,
        "major_grid": GridModel(cells=8),
        "fixed_point": FixedPointModel(damping=0.5, tol=1e-10, max_iter=400),
        "initial_density": DensityModel(kind="von_mises", center=1.0, concentration=1.0),
    }
    fields.update(changes)
    return ScenarioModel(**fields)


def decoupled_model(**changes) -> ScenarioModel:
    """Scenario whose Hamiltonian and terminal cost ignore the measure; Picard stops after two passes."""
    fields = {
        "hamiltonian": HamiltonianModel(kappa=1.0, c0=0.0, psi=[]),
        "terminal": TerminalModel(base=[(1, 0.0, 1.0)]),
        "fixed_point": FixedPointModel(damping=1.0, tol=1e-10, max_iter=50),
    }
    fields.update(changes)
    return small_model(**fields)


@pytest.fixture
def grid():
    """Torus grid with 16 cells."""
    return TorusGrid(cells=16)


@pytest.fixture
def density(grid):
    """Smooth, strictly positive density on the 16-cell grid."""
    return GridDensity.von_mises(grid, center=1.0, concentration=1.0)


@pytest.fixture
def other_density(grid):
    """Second smooth density, distinct from ``density``."""
    return GridDensity.von_mises(grid, center=4.0, concentration=2.0)


@pytest.fixture
def scenario():
    """Coupled scenario on 16 cells."""
    return build_scenario(small_model())


@pytest.fixture
def decoupled_scenario():
    """Measure-independent scenario on 16 cells."""
    return build_scenario(decoupled_model())


@pytest.fixture
def noisy_scenario():
    """Measure-independent scenario with common noise 0.5."""
    return build_scenario(decoupled_model(common_noise=0.5))

