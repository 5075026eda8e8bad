"""
Linear Parabolic System Module

Solves families of linear backward equations sharing one diffusion and one
drift,

    -d_t u_l - a u_xx + V u_x + W_l D u_0 + f_l = 0,

where the optional W_l terms couple components l >= 1 to the leader
component 0. All components are stacked and every implicit step is one
factorization applied to all right-hand sides.
"""

from typing import Callable, List, Optional, Sequence

import numpy as np

from mfg_master.measures.grid import TorusGrid
from mfg_master.pde.hj import DEFAULT_CFL, DiffusionFactors, check_cfl
from mfg_master.pde.mesh import Diffusion, ParabolicTrajectory, TimeField, TimeMesh, as_diffusion
from mfg_master.pde.operators import spectral_derivative

# Maps a step index to stacked values of shape (components, cells).
StackedField = Callable[[int], np.ndarray]


def stack_fields(fields: Sequence[Optional[TimeField]], cells: int) -> StackedField:
    """Combine per-component time fields (None meaning zero) into one stacked field."""
    fields = list(fields)

    def stacked(k: int) -> np.ndarray:
        out = np.zeros((len(fields), cells))
        for index, field in enumerate(fields):
            if field is not None:
                out[index] = field(k)
        return out

    return stacked


def solve_linear_stack(
    a: Diffusion,
    drift: TimeField,
    terminals: np.ndarray,
    mesh: TimeMesh,
    grid: TorusGrid,
    sources: Optional[StackedField] = None,
    leader_coupling: Optional[StackedField] = None,
    cfl_limit: float = DEFAULT_CFL,
) -> np.ndarray:
    """
    Solve the stacked system backward from ``terminals``.

    Args:
        a (Diffusion): Shared diffusion.
        drift (TimeField): Shared drift V at step k.
        terminals (np.ndarray): Terminal data of shape (components, cells).
        mesh (TimeMesh): Time mesh.
        grid (TorusGrid): Spatial grid.
        sources (Optional[StackedField]): f_l at step k, shape (components, cells).
        leader_coupling (Optional[StackedField]): W_l at step k for l >= 1,
            shape (components - 1, cells).
        cfl_limit (float, optional): Admissible Courant number. Defaults to 1.0.

    Returns:
        np.ndarray: Solution of shape (steps + 1, components, cells).

    Raises:
        CFLViolationError: If dt max|V| (or max|W|) exceeds cfl_limit * spacing.
    """
    terminals = np.atleast_2d(np.asarray(terminals, dtype=float))
    components = terminals.shape[0]
    factors = DiffusionFactors(as_diffusion(a), grid, mesh)
    dt = mesh.dt
    out = np.empty((mesh.steps + 1, components, grid.cells))
    out[-1] = terminals
    for k in range(mesh.steps - 1, -1, -1):
        u_next = out[k + 1]
        velocity = np.asarray(drift(k + 1), dtype=float)
        check_cfl(float(np.max(np.abs(velocity))), grid, mesh, cfl_limit, "linear parabolic solver")
        gradients = spectral_derivative(u_next, grid)
        rhs = u_next - dt * velocity * gradients
        if sources is not None:
            rhs -= dt * sources(k + 1)
        if leader_coupling is not None and components > 1:
            rhs[1:] -= dt * leader_coupling(k + 1) * gradients[0]
        out[k] = factors.at(k).solve(rhs)
    return out


def solve_linear_parabolic_system(
    a: Diffusion,
    drift: TimeField,
    sources: Sequence[Optional[TimeField]],
    terminals: Sequence[np.ndarray],
    mesh: TimeMesh,
    grid: TorusGrid,
    leader_coupling: Optional[Sequence[Optional[TimeField]]] = None,
    cfl_limit: float = DEFAULT_CFL,
) -> List[ParabolicTrajectory]:
    """
    Per-component interface to :func:`solve_linear_stack`.

    Args:
        a (Diffusion): Shared diffusion.
        drift (TimeField): Shared drift V.
        sources (Sequence[Optional[TimeField]]): f_l per component (None for zero).
        terminals (Sequence[np.ndarray]): g_l per component.
        mesh (TimeMesh): Time mesh.
        grid (TorusGrid): Spatial grid.
        leader_coupling (Optional[Sequence[Optional[TimeField]]]): W_l for components 1.. (None for zero).
        cfl_limit (float, optional): Admissible Courant number. Defaults to 1.0.

    Returns:
        List[ParabolicTrajectory]: One trajectory per component, in input order.
    """
    if len(sources) != len(terminals):
        raise ValueError(f"got {len(sources)} sources for {len(terminals)} terminals")
    coupling = None
    if leader_coupling is not None:
        coupling = stack_fields(leader_coupling, grid.cells)
    stack = solve_linear_stack(
        a,
        drift,
        np.stack([np.asarray(g, dtype=float) for g in terminals]),
        mesh,
        grid,
        sources=stack_fields(sources, grid.cells),
        leader_coupling=coupling,
        cfl_limit=cfl_limit,
    )
    return [ParabolicTrajectory(mesh, grid, stack[:, l, :], kind="function") for l in range(stack.shape[1])]
