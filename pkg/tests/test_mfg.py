"""
Tests for mfg/ - the coupled MFG system, terminal functionals, linearizations and audits
"""

import numpy as np
import pytest

from mfg_master.cli.scenarios import build_scenario
from mfg_master.errors import ConvergenceError, IncompatibleGridError, MissingDerivativeError
from mfg_master.measures.grid import GridDensity, GridSignedMeasure, TorusGrid
from mfg_master.measures.transport import lipschitz_dual_norm, wasserstein1
from mfg_master.mfg.audits import duality_audit, flow_consistency_gap, stability_audit
from mfg_master.mfg.functionals import (
    CatalogScalarTerminal,
    CatalogTerminal,
    CatalogTerminalForm,
    FixedTerminal,
    FunctionValuedTerminal,
    MeasureFunctional,
)
from mfg_master.mfg.linearized import solve_linearized1, solve_linearized2
from mfg_master.mfg.sources import build_tilde_sources, build_x0_sources
from mfg_master.mfg.system import solve_mfg, solve_mfg_nested
from mfg_master.pde.hamiltonian import FourierKernel
from mfg_master.schemas import HamiltonianModel, TerminalModel
from tests.conftest import small_model


@pytest.fixture
def solution(scenario):
    """Converged MFG solution of the coupled scenario from its initial density."""
    return solve_mfg(scenario, 0.0, scenario.initial_density)


@pytest.fixture
def direction(density, other_density):
    """Zero-mass measure direction."""
    return other_density.values - density.values


@pytest.fixture
def rich_form():
    """Catalog terminal form with every coefficient switched on."""
    return CatalogTerminalForm(
        base=FourierKernel.of([(1, 0.2, 1.0)]),
        gamma=0.3,
        a=0.5,
        b=0.4,
        psi=FourierKernel.of([(1, 1.0, 0.5), (2, 0.0, 0.3)]),
        e=0.6,
        q=0.2,
        eta=FourierKernel.of([(1, 0.0, 1.0)]),
        delta=0.7,
    )


class TestSolveMFG:
    """Tests for the damped Picard solver."""

    def test_converges_below_tolerance(self, scenario, solution):
        """Test that the final gap is below the tolerance."""
        assert solution.final_gap < scenario.fixed_point.tol
        assert solution.iterations == len(solution.gaps)
        assert solution.mesh.steps == 8

    def test_terminal_identity(self, scenario, solution):
        """Test that u(T) = G(x0, ., m(T)) exactly on the grid."""
        expected = scenario.terminal.evaluate(solution.terminal_density(), solution.x0)
        np.testing.assert_allclose(solution.u.final, expected, atol=1e-12)

    def test_densities_stay_probability_densities(self, scenario, solution):
        """Test that every density snapshot has unit mass and no negative values."""
        masses = scenario.grid.spacing * np.sum(solution.m.snapshots, axis=1)
        np.testing.assert_allclose(masses, 1.0, atol=1e-12)
        assert np.all(solution.m.snapshots >= 0.0)
        np.testing.assert_array_equal(solution.m.initial, scenario.initial_density.values)

    def test_decoupled_scenario_needs_two_passes(self, decoupled_scenario):
        """Test that a measure-independent scenario converges on the second Picard pass."""
        result = solve_mfg(decoupled_scenario, 0.0, decoupled_scenario.initial_density)
        assert result.iterations == 2
        assert result.final_gap < 1e-14

    def test_iteration_budget(self, scenario):
        """Test that an exhausted iteration budget raises ConvergenceError."""
        strict = scenario.with_fixed_point(max_iter=1)
        with pytest.raises(ConvergenceError) as exc_info:
            solve_mfg(strict, 0.0, strict.initial_density)
        assert exc_info.value.iterations == 1
        assert exc_info.value.gap > exc_info.value.tol

    def test_incompatible_initial_density(self, scenario):
        """Test that an initial density on another grid is rejected."""
        with pytest.raises(IncompatibleGridError):
            solve_mfg(scenario, 0.0, GridDensity.uniform(TorusGrid(cells=32)))

    def test_sub_interval(self, scenario, density):
        """Test that a solve on [t0, t1] uses the covering mesh."""
        result = solve_mfg(scenario, 0.025, density, t1=0.075)
        assert result.mesh.steps == 4
        assert result.mesh.t0 == 0.025 and result.mesh.t1 == 0.075


class CountingTerminal(MeasureFunctional):
    """Terminal wrapper that counts evaluations."""

    def __init__(self, inner: MeasureFunctional):
        self.inner = inner
        self.grid = inner.grid
        self.calls = 0

    def evaluate(self, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        self.calls += 1
        return self.inner.evaluate(m, x0)


class TestNestedTerminalSolve:
    """Tests for the MFG solve that evaluates its terminal only on converged flows."""

    def test_reaches_the_direct_fixed_point(self, scenario, density):
        """Test that the outer terminal iteration lands on the damped Picard fixed point."""
        direct = solve_mfg(scenario, 0.0, density)
        nested = solve_mfg_nested(scenario, 0.0, density)
        np.testing.assert_allclose(nested.u.initial, direct.u.initial, atol=1e-8)
        np.testing.assert_allclose(nested.m.final, direct.m.final, atol=1e-8)
        assert nested.final_gap < scenario.fixed_point.tol
        assert wasserstein1(nested.terminal_target, nested.terminal_density()) < scenario.fixed_point.tol
        assert nested.terminal is scenario.terminal

    def test_terminal_evaluated_once_per_outer_iteration(self, scenario, density):
        """Test that the terminal is evaluated far less often than by the direct solve."""
        direct_terminal = CountingTerminal(scenario.terminal)
        direct = solve_mfg(scenario, 0.0, density, terminal=direct_terminal)
        nested_terminal = CountingTerminal(scenario.terminal)
        nested = solve_mfg_nested(scenario, 0.0, density, terminal=nested_terminal)
        assert direct_terminal.calls == direct.iterations + 1
        assert nested_terminal.calls == len(nested.gaps)
        assert nested_terminal.calls < direct_terminal.calls

    def test_outer_iteration_budget(self, scenario, density):
        """Test that an exhausted outer iteration budget raises ConvergenceError."""
        strict = scenario.with_fixed_point(max_iter=1)
        with pytest.raises(ConvergenceError):
            solve_mfg_nested(strict, 0.0, density)

    def test_warm_start_flow(self, scenario, density):
        """Test that starting from a converged flow needs a single Picard pass and a bad shape is rejected."""
        direct = solve_mfg(scenario, 0.0, density)
        frozen = FixedTerminal(scenario.grid, direct.u.final)
        restarted = solve_mfg(scenario, 0.0, density, terminal=frozen, initial_flow=direct.m.snapshots)
        assert restarted.iterations == 1
        with pytest.raises(IncompatibleGridError):
            solve_mfg(scenario, 0.0, density, initial_flow=np.ones((3, scenario.grid.cells)))

    def test_fixed_terminal_ignores_the_measure(self, grid, density, other_density):
        """Test that a fixed terminal returns its values for any density and checks their shape."""
        values = np.sin(grid.nodes)
        terminal = FixedTerminal(grid, values)
        np.testing.assert_array_equal(terminal.evaluate(density), terminal.evaluate(other_density))
        np.testing.assert_array_equal(terminal.flat_derivative(density, density.values), 0.0)
        with pytest.raises(IncompatibleGridError):
            FixedTerminal(grid, np.zeros(8))


class TestFlowConsistency:
    """Tests for the flow property of the value function."""

    @pytest.mark.parametrize("k", [2, 4, 6])
    def test_restart_reproduces_value(self, scenario, solution, k):
        """Test that restarting from (t_k, m(t_k)) reproduces u(t_k)."""
        assert flow_consistency_gap(solution, k) <= 50 * scenario.fixed_point.tol

    def test_restart_index_range(self, solution):
        """Test that the final index is not a valid restart."""
        with pytest.raises(ValueError):
            flow_consistency_gap(solution, solution.mesh.steps)


class TestTerminalFunctionals:
    """Tests for the catalog terminal and its derivatives."""

    def test_flat_derivative_matches_difference(self, grid, density, direction, rich_form):
        """Test that the flat derivative matches a central difference in m."""
        terminal = CatalogTerminal(grid, rich_form)
        rho = GridSignedMeasure(grid, direction)
        step = 1e-5
        plus = terminal.evaluate(density.perturbed(rho, step), 0.4)
        minus = terminal.evaluate(density.perturbed(rho, -step), 0.4)
        exact = terminal.flat_derivative(density, direction, 0.4)
        np.testing.assert_allclose(exact, (plus - minus) / (2 * step), atol=1e-8)

    def test_flat_derivative_normalization(self, grid, density, rich_form):
        """Test that dG/dm(m)(m) = 0 and that mass in the direction is ignored."""
        terminal = CatalogTerminal(grid, rich_form)
        np.testing.assert_allclose(terminal.flat_derivative(density, density.values), 0.0, atol=1e-13)
        direction = np.cos(grid.nodes)
        shifted = direction + 3.0 * density.values
        np.testing.assert_allclose(
            terminal.flat_derivative(density, shifted), terminal.flat_derivative(density, direction), atol=1e-13
        )

    def test_second_flat_derivative_matches_difference(self, grid, density, direction, rich_form):
        """Test that the second flat derivative differentiates the first one."""
        terminal = CatalogTerminal(grid, rich_form)
        rho = GridSignedMeasure(grid, direction)
        second = np.sin(2 * grid.nodes) * density.values
        second = second - grid.spacing * np.sum(second) * density.values
        step = 1e-5
        plus = terminal.flat_derivative(density.perturbed(rho, step), second)
        minus = terminal.flat_derivative(density.perturbed(rho, -step), second)
        exact = terminal.second_flat_derivative(density, direction, second)
        np.testing.assert_allclose(exact, (plus - minus) / (2 * step), atol=1e-8)

    def test_second_flat_derivative_is_symmetric(self, grid, density, direction, rich_form):
        """Test that the second flat derivative is symmetric in its directions."""
        terminal = CatalogTerminal(grid, rich_form)
        second = np.cos(3 * grid.nodes)
        np.testing.assert_allclose(
            terminal.second_flat_derivative(density, direction, second),
            terminal.second_flat_derivative(density, second, direction),
            atol=1e-14,
        )

    def test_x0_derivatives_match_differences(self, grid, density, rich_form):
        """Test the x0 derivatives against central differences."""
        terminal = CatalogTerminal(grid, rich_form)
        x0, step = 0.9, 1e-5
        first = (terminal.evaluate(density, x0 + step) - terminal.evaluate(density, x0 - step)) / (2 * step)
        np.testing.assert_allclose(terminal.x0_derivative(density, x0), first, atol=1e-8)
        second = (terminal.x0_derivative(density, x0 + step) - terminal.x0_derivative(density, x0 - step)) / (
            2 * step
        )
        np.testing.assert_allclose(terminal.x0_second_derivative(density, x0), second, atol=1e-8)

    def test_scalar_terminal_ignores_x0_coupling(self, grid, density, rich_form):
        """Test that the major terminal drops gamma and delta."""
        plain = CatalogTerminalForm(
            base=rich_form.base, a=rich_form.a, b=rich_form.b, psi=rich_form.psi,
            e=rich_form.e, q=rich_form.q, eta=rich_form.eta,
        )
        points = np.array([0.0, 1.0, 2.5])
        np.testing.assert_allclose(
            CatalogScalarTerminal(rich_form).values(density, points), plain.value(points, density), atol=1e-15
        )

    def test_missing_derivative(self, grid, density):
        """Test that a callable terminal without derivative raises MissingDerivativeError."""
        terminal = FunctionValuedTerminal(grid, lambda x0, m: np.sin(grid.nodes))
        np.testing.assert_allclose(terminal.evaluate(density), np.sin(grid.nodes))
        with pytest.raises(MissingDerivativeError):
            terminal.flat_derivative(density, density.values)
        with pytest.raises(MissingDerivativeError):
            terminal.x0_derivative(density)


class TestLinearizedSystems:
    """Tests for the first- and second-order linearizations."""

    def test_first_order_matches_difference(self, scenario, solution, density, direction):
        """Test that v(t0) is the derivative of u(t0) along the direction."""
        m0 = scenario.initial_density
        rho = GridSignedMeasure(scenario.grid, direction)
        step = 1e-3
        plus = solve_mfg(scenario, 0.0, m0.perturbed(rho, step)).u.initial
        minus = solve_mfg(scenario, 0.0, m0.perturbed(rho, -step)).u.initial
        linearized = solve_linearized1(solution, direction)
        np.testing.assert_allclose(linearized.v.initial, (plus - minus) / (2 * step), atol=1e-5)

    def test_first_order_density_matches_difference(self, scenario, solution, direction):
        """Test that rho(T) is the derivative of m(T) along the direction."""
        m0 = scenario.initial_density
        rho = GridSignedMeasure(scenario.grid, direction)
        step = 1e-3
        plus = solve_mfg(scenario, 0.0, m0.perturbed(rho, step)).m.final
        minus = solve_mfg(scenario, 0.0, m0.perturbed(rho, -step)).m.final
        linearized = solve_linearized1(solution, direction)
        np.testing.assert_allclose(linearized.rho.final, (plus - minus) / (2 * step), atol=1e-5)

    def test_zero_mass_is_preserved(self, scenario, solution, direction):
        """Test that the density perturbation keeps zero mass."""
        linearized = solve_linearized1(solution, direction)
        masses = scenario.grid.spacing * np.sum(linearized.rho.snapshots, axis=1)
        np.testing.assert_allclose(masses, 0.0, atol=1e-12)

    def test_linearity(self, scenario, solution, direction, grid):
        """Test that the solution depends linearly on the initial perturbation."""
        other = np.cos(2 * grid.nodes) * scenario.initial_density.values
        other = other - grid.spacing * np.sum(other) * scenario.initial_density.values
        first = solve_linearized1(solution, direction).v.initial
        second = solve_linearized1(solution, other).v.initial
        combined = solve_linearized1(solution, 2.0 * direction - 0.5 * other).v.initial
        np.testing.assert_allclose(combined, 2.0 * first - 0.5 * second, atol=1e-9)

    def test_zero_direction(self, solution, grid):
        """Test that a zero direction gives a zero solution."""
        linearized = solve_linearized1(solution, np.zeros(grid.cells))
        assert np.max(np.abs(linearized.v.snapshots)) < 1e-14
        assert np.max(np.abs(linearized.rho.snapshots)) < 1e-14

    def test_second_order_is_symmetric(self, solution, direction, grid):
        """Test that swapping the two directions leaves w unchanged."""
        other = np.sin(grid.nodes) * solution.m.initial
        other = other - grid.spacing * np.sum(other) * solution.m.initial
        first = solve_linearized1(solution, direction)
        second = solve_linearized1(solution, other)
        forward = solve_linearized2(first, second).v.initial
        backward = solve_linearized2(second, first).v.initial
        np.testing.assert_allclose(forward, backward, atol=1e-9)
        assert solve_linearized2(first, second).rho.initial == pytest.approx(np.zeros(grid.cells))

    def test_second_order_needs_shared_reference(self, scenario, solution, direction):
        """Test that first-order solutions around different solves are rejected."""
        other_solution = solve_mfg(scenario, 0.0, scenario.initial_density)
        with pytest.raises(ValueError):
            solve_linearized2(
                solve_linearized1(solution, direction), solve_linearized1(other_solution, direction)
            )


class TestX0Sources:
    """Tests for the x0-direction source terms."""

    def test_sources_vanish_without_x0_coupling(self, solution):
        """Test that zero x0 coupling gives zero sources."""
        sources = build_x0_sources(solution)
        for k in range(solution.mesh.steps + 1):
            assert np.all(sources.r1(k) == 0.0)
            assert np.all(sources.r2_drift(k) == 0.0)
        assert np.all(sources.r3 == 0.0)

    def test_sources_with_coupling(self):
        """Test that the x0 coupling produces a mass-neutral R2 and nonzero R1, R3."""
        scenario = build_scenario(
            small_model(
                hamiltonian=HamiltonianModel(c0=0.5, alpha=0.3, psi=[(1, 1.0, 0.0)]),
                terminal=TerminalModel(base=[(1, 0.0, 1.0)], gamma=0.4),
            )
        )
        around = solve_mfg(scenario, 0.0, scenario.initial_density, x0=0.5)
        sources = build_x0_sources(around)
        assert np.max(np.abs(sources.r1(3))) > 0.0
        assert np.max(np.abs(sources.r3)) > 0.0
        r2 = sources.r2(3)
        np.testing.assert_array_equal(r2.density, around.m.snapshots[3])

    def test_tilde_sources_empty_for_measure_directions(self, solution, direction):
        """Test that two measure directions produce no tilde sources."""
        first = solve_linearized1(solution, direction)
        tilde = build_tilde_sources(first, first)
        assert tilde.running is None and tilde.drift_shift is None and tilde.terminal is None


class TestMFGAudits:
    """Tests for the stability and duality audits."""

    def test_identical_data_are_stable(self, scenario):
        """Test that identical initial data give zero distances."""
        m0 = scenario.initial_density
        report = stability_audit(scenario, m0, m0)
        assert report["initial_distance"] == 0.0
        assert report["sup_distance"] == pytest.approx(0.0, abs=1e-9)
        assert report["fitted_constant"] == 0.0

    def test_stability_report(self, scenario, density, other_density):
        """Test that the stability report is complete and nonnegative."""
        report = stability_audit(scenario, density, other_density, 0.0, 0.2)
        assert report["horizon"] == pytest.approx(scenario.horizon)
        assert report["x0_gap"] == pytest.approx(0.2)
        assert report["initial_distance"] > 0.0
        assert report["fitted_constant"] >= 0.0

    def test_duality_report(self, solution, direction, grid):
        """Test that the duality audit starts from the exact dual norm of rho0."""
        report = duality_audit(solution, direction)
        exact = lipschitz_dual_norm(GridSignedMeasure(grid, direction))
        assert report["k"] == 1
        assert report["initial_norm"] == pytest.approx(exact, rel=1e-12)
        assert report["sup_norm"] >= report["initial_norm"]
        assert report["fitted_constant"] >= 0.0
        assert report["source_norm"] == 0.0
