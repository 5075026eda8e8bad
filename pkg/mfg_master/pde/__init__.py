"""
Parabolic solvers on the one-dimensional torus.

Backward Hamilton-Jacobi and linear systems, forward Fokker-Planck for
densities and signed measures, the catalog Hamiltonian and solver audits.
"""

from mfg_master.pde.fokker_planck import (
    DriftCurvature,
    DriftVariation,
    solve_fp_forward,
    solve_fp_signed_forward,
)
from mfg_master.pde.hamiltonian import CatalogHamiltonian, FourierKernel, FrozenHamiltonian
from mfg_master.pde.hj import PointwiseHamiltonian, solve_hj_backward
from mfg_master.pde.linear import solve_linear_parabolic_system, solve_linear_stack
from mfg_master.pde.mesh import DiffusionField, ParabolicTrajectory, TimeMesh

__all__ = [
    "TimeMesh",
    "DiffusionField",
    "ParabolicTrajectory",
    "CatalogHamiltonian",
    "FourierKernel",
    "FrozenHamiltonian",
    "PointwiseHamiltonian",
    "DriftVariation",
    "DriftCurvature",
    "solve_hj_backward",
    "solve_linear_parabolic_system",
    "solve_linear_stack",
    "solve_fp_forward",
    "solve_fp_signed_forward",
]
