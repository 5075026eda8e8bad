"""
The coupled MFG system and its linearizations.
"""

from mfg_master.mfg.functionals import (
    CatalogScalarTerminal,
    CatalogTerminal,
    CatalogTerminalForm,
    FixedTerminal,
    MeasureFunctional,
    ScalarMeasureFunctional,
)
from mfg_master.mfg.linearized import (
    LinearizedSolution,
    LinearizedSources,
    solve_linearized1,
    solve_linearized2,
)
from mfg_master.mfg.scenario import FixedPointConfig, Scenario
from mfg_master.mfg.sources import build_tilde_sources, build_x0_sources
from mfg_master.mfg.system import MFGSolution, solve_mfg, solve_mfg_nested

__all__ = [
    "MeasureFunctional",
    "ScalarMeasureFunctional",
    "CatalogTerminal",
    "CatalogScalarTerminal",
    "CatalogTerminalForm",
    "FixedTerminal",
    "Scenario",
    "FixedPointConfig",
    "MFGSolution",
    "LinearizedSolution",
    "LinearizedSources",
    "solve_mfg",
    "solve_mfg_nested",
    "solve_linearized1",
    "solve_linearized2",
    "build_x0_sources",
    "build_tilde_sources",
]
