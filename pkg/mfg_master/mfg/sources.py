"""
Linearization Sources Module

Source terms that turn the linearized systems into derivatives with respect
to the major state x0:

- first order: R1 = -d_x0 H xi, R2 = m d_x0 H_p xi (divergence form),
  R3 = d_x0 G xi, all along the reference trajectories;
- second order: the terms of the mixed (x0, m) and (x0, x0) derivatives that
  involve the x0 displacements of the two directions.
"""

from dataclasses import dataclass

import numpy as np

from mfg_master.mfg.linearized import LinearizedSolution, LinearizedSources
from mfg_master.mfg.system import MFGSolution
from mfg_master.pde.fokker_planck import DriftVariation
from mfg_master.pde.mesh import TimeField


@dataclass(frozen=True, eq=False)
class X0Sources:
    """
    The triple (R1, R2, R3) of an x0 direction.

    Attributes:
        r1 (TimeField): -d_x0 H(x0, x, u_x, m) xi at step k.
        r2_drift (TimeField): d_x0 H_p xi at step k; R2 is m times this drift, in divergence form.
        r3 (np.ndarray): d_x0 G(x0, x, m(T)) xi.
        around (MFGSolution): Reference solution.
        xi (float): x0 displacement.
    """

    r1: TimeField
    r2_drift: TimeField
    r3: np.ndarray
    around: MFGSolution
    xi: float = 1.0

    def r2(self, k: int) -> DriftVariation:
        """R2 at step k as an exact flux variation of m."""
        return DriftVariation(self.around.m.snapshots[k], self.r2_drift(k))

    def as_linearized(self) -> LinearizedSources:
        r1 = self.r1
        return LinearizedSources(
            running=lambda k: -r1(k),
            drift_shift=self.r2_drift,
            terminal=self.r3,
            xi=self.xi,
        )


def build_x0_sources(around: MFGSolution, xi: float = 1.0) -> X0Sources:
    """
    Sources of the first-order system representing d/dx0 in the direction xi.

    Args:
        around (MFGSolution): Reference solution.
        xi (float, optional): x0 displacement. Defaults to 1.0.

    Returns:
        X0Sources: The three sources.

    Raises:
        MissingDerivativeError: If the terminal has no x0 derivative.
    """
    p = around.gradients

    def r1(k: int) -> np.ndarray:
        return -xi * around.frozen(k).dx0(p[k])

    def r2_drift(k: int) -> np.ndarray:
        return xi * around.frozen(k).dx0_dp(p[k])

    r3 = xi * around.terminal.x0_derivative(around.terminal_density(), around.x0)
    return X0Sources(r1=r1, r2_drift=r2_drift, r3=np.asarray(r3, dtype=float), around=around, xi=xi)


def build_tilde_sources(first: LinearizedSolution, second: LinearizedSolution) -> LinearizedSources:
    """
    x0 terms of the second-order system for directions (xi, rho0) and (xi', rho0').

    With q = v_x and q' = v'_x:

        running  = H_x0p (xi q' + xi' q) + d_x0 dH/dm(rho') xi + d_x0 dH/dm(rho) xi' + H_x0x0 xi xi'
        drift    = H_x0pp (xi q' + xi' q) + d_x0 dH_p/dm(rho') xi + d_x0 dH_p/dm(rho) xi' + H_x0x0p xi xi'
        terminal = d_x0 dG/dm(rho'(T)) xi + d_x0 dG/dm(rho(T)) xi' + G_x0x0 xi xi'

    The formula is symmetric in the two directions and vanishes when neither carries an x0 displacement.
    """
    around = first.around
    xi, xi2 = first.xi, second.xi
    if xi == 0.0 and xi2 == 0.0:
        return LinearizedSources()
    p = around.gradients
    q, q2 = first.gradients, second.gradients
    rho, rho2 = first.rho.snapshots, second.rho.snapshots
    steps = around.mesh.steps

    def running(k: int) -> np.ndarray:
        frozen = around.frozen(k)
        return (
            frozen.dx0_dp(p[k]) * (xi * q2[k] + xi2 * q[k])
            + xi * frozen.dx0_flat(p[k], rho2[k])
            + xi2 * frozen.dx0_flat(p[k], rho[k])
            + xi * xi2 * frozen.dx0x0(p[k])
        )

    def drift_shift(k: int) -> np.ndarray:
        frozen = around.frozen(k)
        return (
            frozen.dx0_dpp(p[k]) * (xi * q2[k] + xi2 * q[k])
            + xi * frozen.dx0_flat_dp(rho2[k])
            + xi2 * frozen.dx0_flat_dp(rho[k])
            + xi * xi2 * frozen.dx0x0_dp(p[k])
        )

    terminal_density = around.terminal_density()
    terminal = xi * xi2 * around.terminal.x0_second_derivative(terminal_density, around.x0)
    if xi != 0.0:
        terminal = terminal + xi * around.terminal.x0_flat_derivative(terminal_density, rho2[steps], around.x0)
    if xi2 != 0.0:
        terminal = terminal + xi2 * around.terminal.x0_flat_derivative(terminal_density, rho[steps], around.x0)
    return LinearizedSources(running=running, drift_shift=drift_shift, terminal=np.asarray(terminal, dtype=float))


def build_mixed_tilde_sources(x0_direction: LinearizedSolution, measure_direction: LinearizedSolution) -> LinearizedSources:
    """Tilde sources of the mixed derivative d_x0 dU/dm."""
    if measure_direction.xi != 0.0:
        raise ValueError("the measure direction must not carry an x0 displacement")
    return build_tilde_sources(x0_direction, measure_direction)


def build_x0x0_tilde_sources(x0_direction: LinearizedSolution, x0_direction2: LinearizedSolution) -> LinearizedSources:
    """Tilde sources of the second x0 derivative."""
    return build_tilde_sources(x0_direction, x0_direction2)
