"""
Hamilton-Jacobi Solver Module

Backward IMEX solver for -d_t u - a u_xx + h(t, x, u_x) = 0 on the torus:
implicit periodic diffusion, explicit Hamiltonian. The gradient is spectral
by default; ``gradient="upwind"`` switches to a monotone Lax-Friedrichs
flux built from one-sided differences.
"""

from typing import Callable, Optional, Protocol

import numpy as np

from mfg_master.errors import CFLViolationError
from mfg_master.measures.grid import GridFunction, TorusGrid
from mfg_master.pde.mesh import (
    Diffusion,
    DiffusionField,
    ParabolicTrajectory,
    TimeMesh,
    as_diffusion,
    diffusion_values,
)
from mfg_master.pde.operators import (
    ImplicitDiffusion,
    backward_difference,
    forward_difference,
    spectral_derivative,
)
from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_CFL = 1.0

GRADIENT_MODES = ("spectral", "upwind")


class HamiltonianClosure(Protocol):
    """A Hamiltonian h(t_k, x, p) indexed by the mesh step k."""

    def __call__(self, k: int, p: np.ndarray) -> np.ndarray:
        ...

    def gradient(self, k: int, p: np.ndarray) -> np.ndarray:
        """h_p(t_k, x, p)."""
        ...


class PointwiseHamiltonian:
    """
    Closure from plain vectorized functions of (t, x, p).

    Args:
        grid (TorusGrid): Spatial grid supplying x.
        mesh (TimeMesh): Time mesh supplying t_k.
        value (Callable): h(t, x, p).
        gradient (Callable): h_p(t, x, p).
    """

    def __init__(
        self,
        grid: TorusGrid,
        mesh: TimeMesh,
        value: Callable[[float, np.ndarray, np.ndarray], np.ndarray],
        gradient: Callable[[float, np.ndarray, np.ndarray], np.ndarray],
    ):
        self._nodes = grid.nodes
        self._times = mesh.times
        self._value = value
        self._gradient = gradient

    def __call__(self, k: int, p: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self._value(float(self._times[k]), self._nodes, p), p.shape)

    def gradient(self, k: int, p: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self._gradient(float(self._times[k]), self._nodes, p), p.shape)


class DiffusionFactors:
    """Reuses the implicit diffusion factorization while a(t_k) is unchanged."""

    def __init__(self, a: DiffusionField, grid: TorusGrid, mesh: TimeMesh):
        self.a = a
        self.grid = grid
        self.mesh = mesh
        self._current: Optional[ImplicitDiffusion] = None

    def at(self, k: int) -> ImplicitDiffusion:
        values = diffusion_values(self.a, float(self.mesh.times[k]), self.grid)
        if self._current is None or not self._current.matches(values, self.mesh.dt):
            self._current = ImplicitDiffusion(self.grid, values, self.mesh.dt)
        return self._current


def check_cfl(speed: float, grid: TorusGrid, mesh: TimeMesh, cfl_limit: float, where: str) -> None:
    """
    Check dt * speed <= cfl_limit * spacing.

    Raises:
        CFLViolationError: With the largest admissible dt.
    """
    if speed <= 0.0:
        return
    required = cfl_limit * grid.spacing / speed
    if mesh.dt > required * (1.0 + 1e-12):
        raise CFLViolationError(required, mesh.dt, where)


def solve_hj_backward(
    a: Diffusion,
    h: HamiltonianClosure,
    g: GridFunction,
    mesh: TimeMesh,
    gradient: str = "spectral",
    cfl_limit: float = DEFAULT_CFL,
) -> ParabolicTrajectory:
    """
    Solve -d_t u - a u_xx + h(t, x, u_x) = 0 backward from u(t1) = g.

    Each step is u^k = (I - dt a(t_k) D2)^{-1} [u^{k+1} - dt h(t_{k+1}, x, D u^{k+1})].

    Args:
        a (Diffusion): Diffusion coefficient.
        h (HamiltonianClosure): Hamiltonian indexed by step.
        g (GridFunction): Terminal data.
        mesh (TimeMesh): Time mesh.
        gradient (str, optional): "spectral" or "upwind". Defaults to "spectral".
        cfl_limit (float, optional): Admissible Courant number. Defaults to 1.0.

    Returns:
        ParabolicTrajectory: u at every mesh time.

    Raises:
        CFLViolationError: If dt max|h_p| exceeds cfl_limit * spacing.
        NonEllipticError: If a is not positive.
    """
    if gradient not in GRADIENT_MODES:
        raise ValueError(f"gradient must be one of {GRADIENT_MODES}, got {gradient!r}")
    grid = g.grid
    factors = DiffusionFactors(as_diffusion(a), grid, mesh)
    dt = mesh.dt
    snapshots = np.empty((mesh.steps + 1, grid.cells))
    snapshots[-1] = g.values
    for k in range(mesh.steps - 1, -1, -1):
        u_next = snapshots[k + 1]
        if gradient == "spectral":
            p = spectral_derivative(u_next, grid)
            speed = float(np.max(np.abs(h.gradient(k + 1, p))))
            ham = h(k + 1, p)
        else:
            p_minus = backward_difference(u_next, grid)
            p_plus = forward_difference(u_next, grid)
            speed = max(
                float(np.max(np.abs(h.gradient(k + 1, p_minus)))),
                float(np.max(np.abs(h.gradient(k + 1, p_plus)))),
            )
            ham = h(k + 1, 0.5 * (p_minus + p_plus)) - 0.5 * speed * (p_plus - p_minus)
        check_cfl(speed, grid, mesh, cfl_limit, "HJ solver")
        snapshots[k] = factors.at(k).solve(u_next - dt * ham)
    logger.debug(f"HJ solve on [{mesh.t0:.4f}, {mesh.t1:.4f}] with {mesh.steps} steps done")
    return ParabolicTrajectory(mesh, grid, snapshots, kind="function")


def default_time_step(grid: TorusGrid, max_drift: float) -> float:
    """dt = min(0.5 spacing / max drift, 0.25 spacing)."""
    if max_drift <= 0.0:
        return 0.25 * grid.spacing
    return min(0.5 * grid.spacing / max_drift, 0.25 * grid.spacing)
