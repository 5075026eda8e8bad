"""
Tests for pde/ - difference operators, HJ, linear and Fokker-Planck solvers, solver audits
"""

import numpy as np
import pytest

from mfg_master.errors import CFLViolationError, NonEllipticError
from mfg_master.measures.grid import GridDensity, GridFunction, GridSignedMeasure, TorusGrid
from mfg_master.pde.audits import (
    STEP_MASS_TOLERANCE,
    bernstein_audit,
    gaussian_spreading_study,
    step_mass_drift,
    weak_form_defect,
)
from mfg_master.pde.fokker_planck import DriftVariation, solve_fp_forward, solve_fp_signed_forward
from mfg_master.pde.hamiltonian import CatalogHamiltonian, FourierKernel
from mfg_master.pde.hj import PointwiseHamiltonian, check_cfl, default_time_step, solve_hj_backward
from mfg_master.pde.linear import solve_linear_parabolic_system, solve_linear_stack
from mfg_master.pde.mesh import DiffusionField, TimeMesh
from mfg_master.pde.operators import (
    FittedFluxOperator,
    bernoulli,
    bernoulli_prime,
    bernoulli_second,
    discrete_lipschitz,
    spectral_derivative,
)


def zero_hamiltonian(grid, mesh):
    return PointwiseHamiltonian(grid, mesh, lambda t, x, p: 0.0 * p, lambda t, x, p: 0.0 * p)


def quadratic_hamiltonian(grid, mesh):
    return PointwiseHamiltonian(grid, mesh, lambda t, x, p: 0.5 * p**2, lambda t, x, p: p)


def running_cost_hamiltonian(grid, mesh):
    return PointwiseHamiltonian(grid, mesh, lambda t, x, p: 0.5 * p**2 - np.cos(x), lambda t, x, p: p)


def transport_hamiltonian(grid, mesh):
    return PointwiseHamiltonian(grid, mesh, lambda t, x, p: 0.5 * np.sin(x) * p, lambda t, x, p: 0.5 * np.sin(x))


class TestOperators:
    """Tests for the discrete operators."""

    def test_spectral_derivative_of_sine(self, grid):
        """Test that the spectral derivative of sin is cos to round-off."""
        values = np.sin(grid.nodes)
        np.testing.assert_allclose(spectral_derivative(values, grid), np.cos(grid.nodes), atol=1e-12)
        np.testing.assert_allclose(spectral_derivative(values, grid, order=2), -values, atol=1e-12)

    def test_spectral_derivative_acts_on_last_axis(self, grid):
        """Test that stacked rows are differentiated independently."""
        stack = np.stack((np.sin(grid.nodes), np.cos(2 * grid.nodes)))
        expected = np.stack((np.cos(grid.nodes), -2 * np.sin(2 * grid.nodes)))
        np.testing.assert_allclose(spectral_derivative(stack, grid), expected, atol=1e-11)

    def test_discrete_lipschitz(self, grid):
        """Test that the discrete Lipschitz constant of sin is close to 1."""
        assert discrete_lipschitz(np.sin(grid.nodes), grid) == pytest.approx(1.0, abs=grid.spacing)

    def test_bernoulli_identities(self):
        """Test that B(0) = 1 and B(-x) = B(x) + x across the series switch."""
        x = np.array([-3.0, -0.5, -0.1001, -0.0999, -1e-6, 0.0, 1e-6, 0.0999, 0.1001, 0.5, 3.0])
        assert bernoulli(np.array([0.0]))[0] == 1.0
        np.testing.assert_allclose(bernoulli(-x), bernoulli(x) + x, atol=1e-13)

    @pytest.mark.parametrize("x", [-2.0, -0.3, -0.05, 0.0, 0.07, 0.4, 2.5])
    def test_bernoulli_derivatives(self, x):
        """Test the closed-form derivatives against central differences."""
        step = 1e-4
        points = np.array([x - step, x, x + step])
        values = bernoulli(points)
        slopes = bernoulli_prime(points)
        assert bernoulli_prime(np.array([x]))[0] == pytest.approx(
            (values[2] - values[0]) / (2 * step), abs=1e-7
        )
        assert bernoulli_second(np.array([x]))[0] == pytest.approx(
            (slopes[2] - slopes[0]) / (2 * step), abs=1e-7
        )

    def test_fitted_flux_variation_is_exact_derivative(self, grid, density):
        """Test that the drift variation flux is the derivative of the face flux."""
        a_values = np.ones(grid.cells)
        drift = 0.8 * np.sin(grid.nodes)
        direction = np.cos(2 * grid.nodes)
        step = 1e-5
        plus = FittedFluxOperator(grid, a_values, drift + step * direction, 0.01).flux(density.values)
        minus = FittedFluxOperator(grid, a_values, drift - step * direction, 0.01).flux(density.values)
        exact = FittedFluxOperator(grid, a_values, drift, 0.01).variation_flux(density.values, direction)
        np.testing.assert_allclose(exact, (plus - minus) / (2 * step), atol=1e-8)


class TestHJSolver:
    """Tests for the backward Hamilton-Jacobi solver."""

    def test_heat_flow_of_sine(self):
        """Test that h = 0, a = 1, g = sin gives exp(-(t1 - t)) sin."""
        grid = TorusGrid(cells=64)
        mesh = TimeMesh(0.0, 0.5, 200)
        g = GridFunction.from_callable(grid, np.sin)
        traj = solve_hj_backward(1.0, zero_hamiltonian(grid, mesh), g, mesh)
        for k in (0, 100, 200):
            exact = np.exp(-(mesh.t1 - mesh.times[k])) * np.sin(grid.nodes)
            np.testing.assert_allclose(traj.snapshots[k], exact, atol=5e-3)

    def test_constants_are_solutions(self, grid):
        """Test that constant data stay constant when h(0) = 0."""
        mesh = TimeMesh(0.0, 0.2, 10)
        g = GridFunction(grid, np.full(grid.cells, 2.5))
        traj = solve_hj_backward(1.0, quadratic_hamiltonian(grid, mesh), g, mesh)
        np.testing.assert_allclose(traj.snapshots, 2.5, atol=1e-13)

    def test_terminal_value_is_kept(self, grid):
        """Test that the last snapshot is the terminal data."""
        mesh = TimeMesh(0.0, 0.1, 5)
        g = GridFunction(grid, 0.3 * np.cos(grid.nodes))
        traj = solve_hj_backward(1.0, quadratic_hamiltonian(grid, mesh), g, mesh)
        np.testing.assert_array_equal(traj.final, g.values)

    def test_upwind_and_spectral_agree(self):
        """Test that both gradient modes solve the same smooth problem."""
        grid = TorusGrid(cells=64)
        mesh = TimeMesh(0.0, 0.2, 40)
        g = GridFunction(grid, 0.5 * np.sin(grid.nodes))
        spectral = solve_hj_backward(1.0, quadratic_hamiltonian(grid, mesh), g, mesh)
        upwind = solve_hj_backward(1.0, quadratic_hamiltonian(grid, mesh), g, mesh, gradient="upwind")
        np.testing.assert_allclose(spectral.initial, upwind.initial, atol=2e-2)

    def test_upwind_mode_is_monotone(self):
        """Test that ordered terminal data give ordered solutions."""
        grid = TorusGrid(cells=32)
        mesh = TimeMesh(0.0, 0.2, 40)
        low = GridFunction(grid, 0.5 * np.sin(grid.nodes))
        high = GridFunction(grid, 0.5 * np.sin(grid.nodes) + 0.1 * (1 + np.cos(grid.nodes)))
        u_low = solve_hj_backward(1.0, transport_hamiltonian(grid, mesh), low, mesh, gradient="upwind")
        u_high = solve_hj_backward(1.0, transport_hamiltonian(grid, mesh), high, mesh, gradient="upwind")
        assert np.all(u_high.snapshots >= u_low.snapshots - 1e-12)

    def test_cfl_violation_names_required_step(self, grid):
        """Test that a large drift raises CFLViolationError with the admissible dt."""
        mesh = TimeMesh(0.0, 1.0, 1)
        g = GridFunction(grid, 5.0 * np.sin(grid.nodes))
        with pytest.raises(CFLViolationError) as exc_info:
            solve_hj_backward(1.0, quadratic_hamiltonian(grid, mesh), g, mesh)
        assert exc_info.value.required_dt < mesh.dt
        assert exc_info.value.actual_dt == mesh.dt

    def test_non_elliptic_diffusion(self, grid):
        """Test that a vanishing diffusion raises NonEllipticError."""
        mesh = TimeMesh(0.0, 0.1, 5)
        g = GridFunction(grid, np.sin(grid.nodes))
        with pytest.raises(NonEllipticError):
            solve_hj_backward(DiffusionField(base=1.0, amplitude=1.0), zero_hamiltonian(grid, mesh), g, mesh)

    def test_unknown_gradient_mode(self, grid):
        """Test that an unknown gradient mode is rejected."""
        mesh = TimeMesh(0.0, 0.1, 5)
        g = GridFunction(grid, np.sin(grid.nodes))
        with pytest.raises(ValueError):
            solve_hj_backward(1.0, zero_hamiltonian(grid, mesh), g, mesh, gradient="central")

    def test_check_cfl_and_default_step(self, grid):
        """Test that the default time step always satisfies the restriction."""
        dt = default_time_step(grid, 3.0)
        check_cfl(3.0, grid, TimeMesh(0.0, dt, 1), 1.0, "test")
        assert default_time_step(grid, 0.0) == pytest.approx(0.25 * grid.spacing)


class TestLinearSystems:
    """Tests for the stacked linear backward solver."""

    def test_constant_source(self, grid):
        """Test that f = 1 with zero terminal data gives u(t) = -(t1 - t)."""
        mesh = TimeMesh(0.0, 0.4, 8)
        out = solve_linear_stack(
            1.0,
            lambda k: np.zeros(grid.cells),
            np.zeros((1, grid.cells)),
            mesh,
            grid,
            sources=lambda k: np.ones((1, grid.cells)),
        )
        for k, t in enumerate(mesh.times):
            np.testing.assert_allclose(out[k, 0], -(mesh.t1 - t), atol=1e-13)

    def test_constant_terminal_without_source(self, grid):
        """Test that constant data are preserved when f = 0 and V = 0."""
        mesh = TimeMesh(0.0, 0.2, 4)
        out = solve_linear_stack(1.0, lambda k: np.zeros(grid.cells), np.full((2, grid.cells), 3.0), mesh, grid)
        np.testing.assert_allclose(out, 3.0, atol=1e-13)

    def test_superposition(self, grid):
        """Test that solutions of summed data are the sums of solutions."""
        mesh = TimeMesh(0.0, 0.2, 10)
        drift = lambda k: 0.5 * np.cos(grid.nodes)
        f1 = lambda k: np.sin(grid.nodes)
        f2 = lambda k: 0.3 * np.cos(3 * grid.nodes) * k
        g1, g2 = np.cos(grid.nodes), 0.2 * np.sin(2 * grid.nodes)
        first = solve_linear_parabolic_system(1.0, drift, [f1], [g1], mesh, grid)[0]
        second = solve_linear_parabolic_system(1.0, drift, [f2], [g2], mesh, grid)[0]
        total = solve_linear_parabolic_system(1.0, drift, [lambda k: f1(k) + f2(k)], [g1 + g2], mesh, grid)[0]
        np.testing.assert_allclose(total.snapshots, first.snapshots + second.snapshots, atol=1e-12)

    def test_component_order_is_irrelevant(self, grid):
        """Test that swapping two components swaps the outputs exactly."""
        mesh = TimeMesh(0.0, 0.2, 10)
        drift = lambda k: 0.5 * np.sin(grid.nodes)
        terminals = [np.cos(grid.nodes), np.sin(2 * grid.nodes)]
        forward = solve_linear_parabolic_system(1.0, drift, [None, None], terminals, mesh, grid)
        swapped = solve_linear_parabolic_system(1.0, drift, [None, None], terminals[::-1], mesh, grid)
        np.testing.assert_allclose(forward[0].snapshots, swapped[1].snapshots, rtol=0, atol=1e-14)
        np.testing.assert_allclose(forward[1].snapshots, swapped[0].snapshots, rtol=0, atol=1e-14)

    def test_leader_coupling_only_affects_followers(self, grid):
        """Test that the leader component ignores the coupling and followers feel it."""
        mesh = TimeMesh(0.0, 0.2, 10)
        drift = lambda k: np.zeros(grid.cells)
        terminals = np.stack((np.sin(grid.nodes), np.zeros(grid.cells)))
        plain = solve_linear_stack(1.0, drift, terminals, mesh, grid)
        coupled = solve_linear_stack(
            1.0, drift, terminals, mesh, grid, leader_coupling=lambda k: np.ones((1, grid.cells))
        )
        np.testing.assert_allclose(plain[:, 0], coupled[:, 0], rtol=0, atol=1e-14)
        assert np.max(np.abs(coupled[0, 1])) > 1e-3

    def test_mismatched_inputs(self, grid):
        """Test that sources and terminals must have the same length."""
        mesh = TimeMesh(0.0, 0.2, 2)
        with pytest.raises(ValueError):
            solve_linear_parabolic_system(1.0, lambda k: np.zeros(grid.cells), [None], [], mesh, grid)


class TestFokkerPlanck:
    """Tests for the forward Fokker-Planck solvers."""

    def test_mass_and_positivity_with_restoring_drift(self):
        """Test that every snapshot is a density under a strong restoring drift."""
        grid = TorusGrid(cells=32)
        mesh = TimeMesh(0.0, 0.5, 50)
        m0 = GridDensity.single_cell(grid, 5)
        drift = lambda k: 2.0 * np.sin(grid.nodes - np.pi)
        traj = solve_fp_forward(DiffusionField(1.0, 0.5, 2), drift, m0, mesh)
        masses = grid.spacing * np.sum(traj.snapshots, axis=1)
        np.testing.assert_allclose(masses, 1.0, atol=1e-12)
        assert np.all(traj.snapshots >= 0.0)
        assert step_mass_drift(grid.spacing, traj.snapshots) <= STEP_MASS_TOLERANCE

    def test_step_mass_drift(self, grid):
        """Test that the drift is the largest change of mass between consecutive snapshots."""
        base = GridDensity.uniform(grid).values
        snapshots = np.stack([base, 1.5 * base, 1.25 * base])
        assert step_mass_drift(grid.spacing, snapshots) == pytest.approx(0.5)
        assert step_mass_drift(grid.spacing, base) == 0.0

    def test_uniform_is_stationary(self, grid):
        """Test that the uniform density stays uniform without drift."""
        mesh = TimeMesh(0.0, 0.2, 10)
        uniform = GridDensity.uniform(grid)
        traj = solve_fp_forward(1.0, lambda k: np.zeros(grid.cells), uniform, mesh)
        np.testing.assert_allclose(traj.final, uniform.values, atol=1e-13)

    def test_gaussian_spreading_converges(self):
        """Test that the heat flow of a wrapped Gaussian converges at second order."""
        rows = gaussian_spreading_study([64, 128])
        assert rows[1]["error"] < rows[0]["error"]
        assert rows[1]["order"] > 1.5
        assert all(row["max_mass_deviation"] < 1e-12 for row in rows)
        assert all(row["max_mass_step_drift"] <= STEP_MASS_TOLERANCE for row in rows)
        assert all(row["min_value"] >= 0.0 for row in rows)

    def test_signed_zero_stays_zero(self, grid):
        """Test that zero data and no sources give zero."""
        mesh = TimeMesh(0.0, 0.1, 5)
        traj = solve_fp_signed_forward(1.0, lambda k: np.zeros(grid.cells), GridSignedMeasure.zero(grid), mesh)
        assert np.all(traj.snapshots == 0.0)

    def test_dipole_decays(self, grid):
        """Test that a zero-mass dipole keeps zero mass and decays in sup norm."""
        mesh = TimeMesh(0.0, 0.2, 20)
        dipole = GridDensity.single_cell(grid, 2).as_signed() - GridDensity.single_cell(grid, 9).as_signed()
        traj = solve_fp_signed_forward(1.0, lambda k: np.zeros(grid.cells), dipole, mesh)
        assert np.all(np.abs(grid.spacing * np.sum(traj.snapshots, axis=1)) < 1e-12)
        sups = np.max(np.abs(traj.snapshots), axis=1)
        assert np.all(np.diff(sups) <= 1e-12)

    def test_divergence_sources_are_mass_neutral(self, grid, density):
        """Test that cell and drift-variation sources create no mass."""
        mesh = TimeMesh(0.0, 0.2, 10)
        drift = lambda k: 0.5 * np.sin(grid.nodes)
        sources = lambda k: [
            2.0 * density.values,
            DriftVariation(density.values, np.cos(grid.nodes)),
        ]
        traj = solve_fp_signed_forward(1.0, drift, GridSignedMeasure.zero(grid), mesh, sources=sources)
        assert np.max(np.abs(traj.snapshots)) > 1e-3
        np.testing.assert_allclose(grid.spacing * np.sum(traj.snapshots, axis=1), 0.0, atol=1e-12)

    def test_weak_form(self, grid, density):
        """Test that the discrete weak form holds up to O(dt + spacing)."""
        mesh = TimeMesh(0.0, 0.1, 50)
        drift = lambda k: 0.5 * np.sin(grid.nodes)
        traj = solve_fp_forward(1.0, drift, density, mesh)
        defect = weak_form_defect(traj, 1.0, drift, np.cos(grid.nodes))
        assert defect < 0.2


class TestBernsteinAudit:
    """Tests for the derivative-growth audit."""

    def test_heat_flow_contracts(self, grid):
        """Test that the heat flow never exceeds the terminal Lipschitz constant."""
        mesh = TimeMesh(0.0, 0.5, 50)
        g = GridFunction.from_callable(grid, np.sin)
        traj = solve_hj_backward(1.0, zero_hamiltonian(grid, mesh), g, mesh)
        report = bernstein_audit(traj, g, max_order=2)
        assert report["sup_lipschitz"] <= report["terminal_lipschitz"] + 1e-12
        assert report["fitted_constant"] == 0.0
        assert len(report["order_norms"]) == 3

    def test_zero_data(self, grid):
        """Test that zero terminal data and h = 0 give zero norms."""
        mesh = TimeMesh(0.0, 0.1, 5)
        g = GridFunction(grid, np.zeros(grid.cells))
        traj = solve_hj_backward(1.0, zero_hamiltonian(grid, mesh), g, mesh)
        report = bernstein_audit(traj, g)
        assert report["order_norms"] == [0.0, 0.0]
        assert report["order_constants"] == [0.0, 0.0]

    def test_quadratic_constant_is_stable_under_refinement(self):
        """Test that the fitted constant of a running-cost problem changes by less than a factor 2 under refinement."""
        constants = []
        for cells in (32, 64):
            grid = TorusGrid(cells=cells)
            mesh = TimeMesh(0.0, 0.5, 4 * cells)
            g = GridFunction(grid, 0.5 * np.sin(grid.nodes) + 0.2 * np.cos(2 * grid.nodes))
            traj = solve_hj_backward(1.0, running_cost_hamiltonian(grid, mesh), g, mesh)
            constants.append(bernstein_audit(traj, g)["order_constants"][0])
        assert constants[0] > 0.0
        assert 0.5 <= constants[1] / constants[0] <= 2.0


class TestCatalogHamiltonian:
    """Tests for the quadratic-convolution Hamiltonian."""

    def test_flat_derivative_matches_difference(self, density, other_density):
        """Test that the normalized flat derivative matches a difference quotient."""
        hamiltonian = CatalogHamiltonian(c0=0.7, c2=0.3, beta=0.4, psi=FourierKernel.of([(1, 1.0, 0.5)]),
                                         phi=FourierKernel.of([(2, 0.0, 1.0)]))
        nodes = density.grid.nodes
        p = np.cos(nodes)
        rho = other_density.values - density.values
        step = 1e-6
        plus = hamiltonian.frozen(density.perturbed(GridSignedMeasure(density.grid, rho), step), nodes).value(p)
        minus = hamiltonian.frozen(density.perturbed(GridSignedMeasure(density.grid, rho), -step), nodes).value(p)
        exact = hamiltonian.frozen(density, nodes).flat(p, rho)
        np.testing.assert_allclose(exact, (plus - minus) / (2 * step), atol=1e-7)

    def test_flat_derivative_of_the_density_vanishes(self, density):
        """Test that the normalization gives dH/dm(m)(m) = 0."""
        hamiltonian = CatalogHamiltonian(c0=1.0, c2=0.5, psi=FourierKernel.of([(1, 1.0, 0.0)]))
        frozen = hamiltonian.frozen(density, density.grid.nodes)
        np.testing.assert_allclose(frozen.flat(np.sin(density.grid.nodes), density.values), 0.0, atol=1e-14)

    def test_scaling_and_independence(self):
        """Test that scaling multiplies coefficients and independence is detected."""
        hamiltonian = CatalogHamiltonian(kappa=1.0, c0=0.5, alpha=0.2, psi=FourierKernel.of([(1, 1.0, 0.0)]))
        doubled = hamiltonian.scaled(2.0)
        assert (doubled.kappa, doubled.c0, doubled.alpha) == (2.0, 1.0, 0.4)
        assert not hamiltonian.is_measure_independent
        assert CatalogHamiltonian(c0=0.5).is_measure_independent
        assert hamiltonian.without_x0_coupling().alpha == 0.0
