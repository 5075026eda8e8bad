"""
Error Types Module

This module defines the exception hierarchy raised by the solvers, the
master-equation evaluators and the scenario loader. Every message names the
violated condition and, where one exists, the remedy.
"""

from typing import Optional


class MFGMasterError(Exception):
    """Base class for all package errors."""


class IncompatibleGridError(MFGMasterError, ValueError):
    """Raised when two objects live on different tori."""


class UnsupportedOrderError(MFGMasterError, ValueError):
    """Raised when a dual norm of an unsupported order is requested."""


class NonEllipticError(MFGMasterError, ValueError):
    """Raised when the diffusion coefficient is not bounded away from zero."""


class CFLViolationError(MFGMasterError):
    """
    Raised when the explicit first-order terms violate the step restriction.

    Attributes:
        required_dt (float): The largest admissible time step.
        actual_dt (float): The time step that was used.
    """

    def __init__(self, required_dt: float, actual_dt: float, where: str = "solver"):
        self.required_dt = required_dt
        self.actual_dt = actual_dt
        super().__init__(
            f"CFL violation in {where}: dt={actual_dt:.3e} exceeds the admissible "
            f"dt={required_dt:.3e}; increase the number of time steps"
        )


class ConvergenceError(MFGMasterError):
    """
    Raised when a fixed-point iteration exhausts its iteration budget.

    Attributes:
        solve (str): Name of the failing sub-solve.
        iterations (int): Iterations performed.
        gap (float): Last measured gap.
        tol (float): Tolerance that was not reached.
    """

    def __init__(self, solve: str, iterations: int, gap: float, tol: float):
        self.solve = solve
        self.iterations = iterations
        self.gap = gap
        self.tol = tol
        super().__init__(
            f"{solve} did not converge after {iterations} iterations "
            f"(gap {gap:.3e} > tol {tol:.1e}); the fixed point is only contractive "
            f"for short horizons, try a smaller T or a smaller damping"
        )


class MissingDerivativeError(MFGMasterError):
    """Raised when a functional does not provide a requested derivative."""

    def __init__(self, functional: str, derivative: str):
        super().__init__(
            f"{functional} does not provide {derivative}; linearized solves need it "
            f"and finite differencing is never substituted silently"
        )


class BudgetExceededError(MFGMasterError):
    """Raised when a scheme run exceeds its evaluation budget."""

    def __init__(self, budget: int, partial: Optional[object] = None):
        self.budget = budget
        self.partial = partial
        super().__init__(
            f"evaluation budget of {budget} MFG solves exhausted; raise --budget or "
            f"lower N"
        )


class ScenarioError(MFGMasterError, ValueError):
    """Raised when a scenario file is malformed or breaches a model assumption."""

    def __init__(self, key_path: str, message: str):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}")
