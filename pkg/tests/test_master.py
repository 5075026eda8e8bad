"""
Tests for master/ - first-order master evaluators and the linear second-order master equation
"""

import math

import numpy as np
import pytest

from mfg_master.cli.scenarios import build_scenario
from mfg_master.master.first_order import (
    d2u0_dm2,
    d2u_dm2,
    d2x0_u,
    delta_u0_delta_m,
    delta_u_delta_m,
    dx0_delta_u,
    dx0_u,
    dx0_u0,
    eval_u,
    eval_u0,
    lions_derivative,
    lipschitz_in_m_audit,
    master_residual_via_flow,
)
from mfg_master.master.linear_second import (
    LinearMasterFunctional,
    dm_linear_master,
    eval_linear_master,
    heat_kernel,
    semigroup_check,
)
from mfg_master.measures.grid import GridDensity, GridSignedMeasure, TorusGrid, smooth_random_density
from mfg_master.mfg.functionals import CatalogTerminal, CatalogTerminalForm
from mfg_master.mfg.system import solve_mfg
from mfg_master.pde.hamiltonian import FourierKernel
from mfg_master.schemas import FixedPointModel, HamiltonianModel, TerminalModel
from tests.conftest import small_model


def sine_plus_cosine_moment(grid: TorusGrid) -> CatalogTerminal:
    """G(x, m) = sin x + int cos dm."""
    form = CatalogTerminalForm(base=FourierKernel.of([(1, 0.0, 1.0)]), e=1.0, eta=FourierKernel.of([(1, 1.0, 0.0)]))
    return CatalogTerminal(grid, form)


def nonlinear_terminal(grid: TorusGrid) -> CatalogTerminal:
    """Catalog terminal with quadratic measure dependence."""
    form = CatalogTerminalForm(
        base=FourierKernel.of([(1, 0.0, 1.0)]),
        a=0.5,
        b=0.8,
        psi=FourierKernel.of([(1, 1.0, 0.0), (2, 0.0, 0.5)]),
        q=0.3,
        eta=FourierKernel.of([(1, 0.0, 1.0)]),
    )
    return CatalogTerminal(grid, form)


def convolution_terminal(grid: TorusGrid) -> CatalogTerminal:
    """G(x, m) = a Psi(x) + (b/2) Psi(x)^2 with Psi = psi * m; invariant under joint translation."""
    form = CatalogTerminalForm(a=0.5, b=0.8, psi=FourierKernel.of([(1, 1.0, 0.5), (2, 0.3, 0.0)]))
    return CatalogTerminal(grid, form)


@pytest.fixture
def precise_scenario():
    """Coupled scenario solved to a tight Picard tolerance for difference quotients."""
    return build_scenario(small_model(fixed_point=FixedPointModel(damping=0.5, tol=1e-12, max_iter=600)))


@pytest.fixture
def major_coupled_scenario():
    """Coupled scenario in which H and G depend on x0."""
    return build_scenario(
        small_model(
            hamiltonian=HamiltonianModel(c0=0.5, alpha=0.3, psi=[(1, 1.0, 0.0)]),
            terminal=TerminalModel(base=[(1, 0.0, 1.0)], gamma=0.4, a=0.5, psi=[(1, 1.0, 0.0)], delta=0.3),
            fixed_point=FixedPointModel(damping=0.5, tol=1e-12, max_iter=600),
        )
    )


@pytest.fixture
def direction(density, other_density):
    """Zero-mass direction between two smooth densities."""
    return other_density.values - density.values


def perturbed(m: GridDensity, direction: np.ndarray, step: float) -> GridDensity:
    return m.perturbed(GridSignedMeasure(m.grid, direction), step)


class TestEvalU:
    """Tests for the value of the first-order master equation."""

    def test_horizon_returns_terminal(self, scenario, density):
        """Test that U(T) is G itself."""
        value = eval_u(scenario, scenario.horizon, 0.0, density)
        np.testing.assert_array_equal(value.values, scenario.terminal.evaluate(density, 0.0))

    def test_initial_time_is_mfg_value(self, scenario, density):
        """Test that U(t0, ., m0) is u(t0) of the MFG solve from (t0, m0)."""
        expected = solve_mfg(scenario, 0.0, density).u.initial
        np.testing.assert_allclose(eval_u(scenario, 0.0, 0.0, density).values, expected, atol=1e-12)

    def test_flow_property(self, scenario, density):
        """Test that U along the equilibrium flow reproduces the earlier solve."""
        earlier = solve_mfg(scenario, 0.0, density)
        k = 4
        later = eval_u(scenario, float(earlier.mesh.times[k]), 0.0, earlier.density(k))
        np.testing.assert_allclose(later.values, earlier.u.snapshots[k], atol=5e-9)

    def test_time_outside_horizon(self, scenario, density):
        """Test that times outside [0, T] are rejected."""
        with pytest.raises(ValueError):
            eval_u(scenario, -0.01, 0.0, density)
        with pytest.raises(ValueError):
            eval_u(scenario, 2 * scenario.horizon, 0.0, density)


class TestFlatDerivative:
    """Tests for dU/dm and its second-order counterpart."""

    def test_density_direction_vanishes(self, scenario, density):
        """Test that the direction m0 itself gives zero and records its mass."""
        result = delta_u_delta_m(scenario, 0.0, 0.0, density, 2.0 * density.values)
        assert result.mass == pytest.approx(2.0)
        np.testing.assert_allclose(result.values, 0.0, atol=5 * scenario.fixed_point.tol)

    def test_linearity(self, scenario, density, direction, grid):
        """Test that the flat derivative is linear in the direction."""
        other = np.cos(grid.nodes) * density.values
        around = solve_mfg(scenario, 0.0, density)
        first = delta_u_delta_m(scenario, 0.0, 0.0, density, direction, around=around).values
        second = delta_u_delta_m(scenario, 0.0, 0.0, density, other, around=around).values
        combined = delta_u_delta_m(scenario, 0.0, 0.0, density, 0.5 * direction + 2.0 * other, around=around)
        np.testing.assert_allclose(combined.values, 0.5 * first + 2.0 * second, atol=1e-9)

    def test_matches_central_difference(self, precise_scenario, density, direction):
        """Test the flat derivative against central differences at h = 2e-2 and 1e-2."""
        exact = delta_u_delta_m(precise_scenario, 0.0, 0.0, density, direction).values
        errors = []
        for step in (2e-2, 1e-2):
            plus = eval_u(precise_scenario, 0.0, 0.0, perturbed(density, direction, step)).values
            minus = eval_u(precise_scenario, 0.0, 0.0, perturbed(density, direction, -step)).values
            errors.append(float(np.max(np.abs((plus - minus) / (2 * step) - exact))))
        assert errors[1] <= 1e-3
        assert errors[1] <= errors[0] / 3 + 1e-9

    def test_horizon_uses_terminal_derivative(self, scenario, density, direction):
        """Test that at t = T the flat derivative of G is returned."""
        result = delta_u_delta_m(scenario, scenario.horizon, 0.0, density, direction)
        expected = scenario.terminal.flat_derivative(density, direction, 0.0)
        np.testing.assert_allclose(result.values, expected, atol=1e-13)
        assert result.linearized is None

    def test_second_derivative_matches_difference(self, precise_scenario, density, direction):
        """Test d2U/dm2(rho, rho) against the second central difference at h = 5e-2."""
        exact = d2u_dm2(precise_scenario, 0.0, 0.0, density, direction, direction).values
        step = 5e-2
        plus = eval_u(precise_scenario, 0.0, 0.0, perturbed(density, direction, step)).values
        minus = eval_u(precise_scenario, 0.0, 0.0, perturbed(density, direction, -step)).values
        center = eval_u(precise_scenario, 0.0, 0.0, density).values
        np.testing.assert_allclose(exact, (plus - 2 * center + minus) / step**2, atol=5e-3)

    def test_second_derivative_symmetry_and_zero(self, scenario, density, direction, grid):
        """Test that d2U/dm2 is symmetric and vanishes on a zero direction."""
        other = np.sin(2 * grid.nodes) * density.values
        around = solve_mfg(scenario, 0.0, density)
        forward = d2u_dm2(scenario, 0.0, 0.0, density, direction, other, around=around).values
        backward = d2u_dm2(scenario, 0.0, 0.0, density, other, direction, around=around).values
        np.testing.assert_allclose(forward, backward, atol=1e-9)
        zero = d2u_dm2(scenario, 0.0, 0.0, density, np.zeros(grid.cells), other, around=around).values
        np.testing.assert_allclose(zero, 0.0, atol=1e-12)


class TestX0Derivatives:
    """Tests for derivatives in the major state."""

    def test_dx0_matches_difference(self, major_coupled_scenario, density):
        """Test D_x0 U against a central difference at h = 1e-3."""
        scenario, x0, step = major_coupled_scenario, 0.7, 1e-3
        exact = dx0_u(scenario, 0.0, x0, density).values
        plus = eval_u(scenario, 0.0, x0 + step, density).values
        minus = eval_u(scenario, 0.0, x0 - step, density).values
        assert np.max(np.abs(exact)) > 1e-3
        np.testing.assert_allclose(exact, (plus - minus) / (2 * step), atol=1e-4)

    def test_second_dx0_matches_difference(self, major_coupled_scenario, density):
        """Test D2_x0 U against a difference of D_x0 U."""
        scenario, x0, step = major_coupled_scenario, 0.7, 1e-3
        exact = d2x0_u(scenario, 0.0, x0, density).values
        plus = dx0_u(scenario, 0.0, x0 + step, density).values
        minus = dx0_u(scenario, 0.0, x0 - step, density).values
        np.testing.assert_allclose(exact, (plus - minus) / (2 * step), atol=1e-4)

    def test_mixed_derivative_matches_difference(self, major_coupled_scenario, density, direction):
        """Test D_x0 dU/dm against a difference of dU/dm in x0."""
        scenario, x0, step = major_coupled_scenario, 0.7, 1e-3
        exact = dx0_delta_u(scenario, 0.0, x0, density, direction).values
        plus = delta_u_delta_m(scenario, 0.0, x0 + step, density, direction).values
        minus = delta_u_delta_m(scenario, 0.0, x0 - step, density, direction).values
        np.testing.assert_allclose(exact, (plus - minus) / (2 * step), atol=1e-4)

    def test_no_x0_coupling_gives_zero(self, scenario, density):
        """Test that D_x0 U vanishes when nothing depends on x0."""
        np.testing.assert_allclose(dx0_u(scenario, 0.0, 0.3, density).values, 0.0, atol=1e-14)


class TestMajorValue:
    """Tests for the scalar value U0 and its derivatives."""

    def test_horizon_value(self, scenario, density):
        """Test that U0(T) = G0(x0, m)."""
        assert eval_u0(scenario, scenario.horizon, 0.4, density) == pytest.approx(
            scenario.major_terminal.value(density, 0.4), abs=1e-15
        )

    def test_value_uses_terminal_density(self, scenario, density):
        """Test that U0(t0) = G0(x0, m(T)) along the MFG flow."""
        solution = solve_mfg(scenario, 0.0, density, 0.4)
        expected = scenario.major_terminal.value(solution.terminal_density(), 0.4)
        assert eval_u0(scenario, 0.0, 0.4, density) == pytest.approx(expected, abs=1e-12)

    def test_flat_derivative_matches_difference(self, precise_scenario, density, direction):
        """Test dU0/dm against a central difference at h = 1e-3."""
        step = 1e-3
        exact = delta_u0_delta_m(precise_scenario, 0.0, 0.4, density, direction)
        plus = eval_u0(precise_scenario, 0.0, 0.4, perturbed(density, direction, step))
        minus = eval_u0(precise_scenario, 0.0, 0.4, perturbed(density, direction, -step))
        assert exact == pytest.approx((plus - minus) / (2 * step), abs=1e-5)

    def test_second_flat_derivative_matches_difference(self, precise_scenario, density, direction):
        """Test d2U0/dm2 against the second central difference at h = 5e-2."""
        step = 5e-2
        exact = d2u0_dm2(precise_scenario, 0.0, 0.4, density, direction, direction)
        plus = eval_u0(precise_scenario, 0.0, 0.4, perturbed(density, direction, step))
        minus = eval_u0(precise_scenario, 0.0, 0.4, perturbed(density, direction, -step))
        center = eval_u0(precise_scenario, 0.0, 0.4, density)
        assert exact == pytest.approx((plus - 2 * center + minus) / step**2, abs=5e-3)

    def test_dx0_matches_difference(self, major_coupled_scenario, density):
        """Test D_x0 U0 against a central difference at h = 1e-3."""
        scenario, step = major_coupled_scenario, 1e-3
        exact = dx0_u0(scenario, 0.0, 0.7, density)
        plus = eval_u0(scenario, 0.0, 0.7 + step, density)
        minus = eval_u0(scenario, 0.0, 0.7 - step, density)
        assert exact == pytest.approx((plus - minus) / (2 * step), abs=1e-5)


class TestLionsDerivative:
    """Tests for the y sweep of dU/dm."""

    def test_kernel_shape_and_normalization(self, scenario, density):
        """Test that the kernel is (x, y) shaped and integrates to zero against m."""
        lions = lions_derivative(scenario, 0.0, 0.0, density)
        grid = scenario.grid
        assert lions.kernel.shape == (grid.cells, grid.cells)
        np.testing.assert_allclose(lions.kernel @ (grid.spacing * density.values), 0.0, atol=1e-9)
        assert lions.d_m().shape == (grid.cells, grid.cells)

    def test_decoupled_kernel_vanishes(self, decoupled_scenario, density):
        """Test that a measure-independent scenario has zero measure derivative."""
        lions = lions_derivative(decoupled_scenario, 0.0, 0.0, density)
        np.testing.assert_allclose(lions.kernel, 0.0, atol=1e-12)

    def test_threaded_sweep_matches_serial(self, scenario, density, monkeypatch):
        """Test that the sweep gives identical columns on several threads."""
        serial = lions_derivative(scenario, 0.0, 0.0, density).kernel
        import mfg_master.utils.config as config_module

        monkeypatch.setenv("MFG_SPLIT_THREADS", "3")
        config_module._config_cache = None
        threaded = lions_derivative(scenario, 0.0, 0.0, density).kernel
        np.testing.assert_array_equal(serial, threaded)


class TestMasterResidual:
    """Tests for the term-by-term residual of the first-order master equation."""

    def test_decoupled_residual_is_discretization_sized(self, decoupled_scenario, density):
        """Test that nonlocal terms vanish and the total is small next to the terms."""
        report = master_residual_via_flow(decoupled_scenario, 0.0, 0.0, density)
        assert report["nonlocal_diffusion"] < 1e-10
        assert report["nonlocal_drift"] < 1e-10
        assert report["total"] < 0.25 * (report["diffusion"] + report["hamiltonian"])
        assert report["delta"] == pytest.approx(decoupled_scenario.time_step)
        assert report["cells"] == 16

    def test_step_is_snapped(self, scenario, density):
        """Test that the difference step is a multiple of the time step."""
        report = master_residual_via_flow(scenario, 0.0, 0.0, density, delta=0.03)
        assert report["delta"] == pytest.approx(2 * scenario.time_step)
        assert all(math.isfinite(report[key]) for key in ("total", "time_derivative", "nonlocal_drift"))

    def test_rejects_overshooting_step(self, scenario, density):
        """Test that a step past the horizon is rejected."""
        with pytest.raises(ValueError):
            master_residual_via_flow(scenario, scenario.horizon - scenario.time_step, 0.0, density, delta=0.03)
        with pytest.raises(ValueError):
            master_residual_via_flow(scenario, scenario.horizon, 0.0, density)


class TestLipschitzAudit:
    """Tests for the Lipschitz-in-measure audit."""

    def test_quotient_is_bounded_by_derivative(self, scenario, density, other_density):
        """Test that difference quotients stay below the sampled derivative bound."""
        pairs = [(density, density.mix(other_density, 0.3)), (density, density)]
        report = lipschitz_in_m_audit(scenario, 0.0, 0.0, pairs)
        assert report["samples"] == 1
        assert report["max_quotient"] > 0.0
        assert report["holds"]


class TestHeatKernel:
    """Tests for the wrapped heat kernel."""

    def test_peak_matches_wrapped_sum(self):
        """Test the kernel at z = 0 against a long wrapped sum."""
        grid = TorusGrid(cells=16)
        kernel = heat_kernel(grid, 1.0, 0.5)
        j = np.arange(-10_000, 10_001)
        expected = np.sum(np.exp(-((j * grid.length) ** 2) / 2.0)) / math.sqrt(2.0 * math.pi)
        assert kernel.weights[0] == pytest.approx(expected, rel=1e-12)

    def test_symmetry_and_mass(self):
        """Test that weights are symmetric in z and have unit mass."""
        grid = TorusGrid(cells=32)
        kernel = heat_kernel(grid, 0.2, 1.0)
        np.testing.assert_allclose(kernel.weights[1:], kernel.weights[1:][::-1], rtol=1e-12)
        assert grid.spacing * np.sum(kernel.weights) == pytest.approx(1.0, abs=1e-13)

    def test_degenerate_kernel(self, grid):
        """Test that a zero duration gives the single-cell kernel."""
        kernel = heat_kernel(grid, 0.0, 1.0)
        assert kernel.weights[0] == pytest.approx(1.0 / grid.spacing)
        assert kernel.active() == [(0, 1.0 / grid.spacing)]

    def test_negative_inputs(self, grid):
        """Test that negative durations or noise are rejected."""
        with pytest.raises(ValueError):
            heat_kernel(grid, -0.1, 1.0)
        with pytest.raises(ValueError):
            heat_kernel(grid, 0.1, -1.0)


class TestLinearMaster:
    """Tests for the linear second-order master equation."""

    def test_analytic_first_mode(self):
        """Test sin x + int cos dm against its exact heat-semigroup decay."""
        grid = TorusGrid(cells=256)
        terminal = sine_plus_cosine_moment(grid)
        rng = np.random.default_rng(2)
        for _ in range(10):
            m = smooth_random_density(grid, rng)
            moment = grid.spacing * float(np.dot(np.cos(grid.nodes), m.values))
            expected = math.exp(-0.3) * (np.sin(grid.nodes) + moment)
            value = eval_linear_master(terminal, 0.3, m, 1.0).values
            np.testing.assert_allclose(value, expected, atol=1e-6)

    def test_zero_duration_is_terminal(self, grid, density):
        """Test that a zero duration returns G."""
        terminal = nonlinear_terminal(grid)
        np.testing.assert_array_equal(
            eval_linear_master(terminal, 0.0, density, 1.0).values, terminal.evaluate(density)
        )

    def test_zero_noise_is_identity(self, grid, density):
        """Test that a0 = 0 leaves G unchanged."""
        terminal = nonlinear_terminal(grid)
        np.testing.assert_allclose(
            eval_linear_master(terminal, 0.2, density, 0.0).values, terminal.evaluate(density), atol=1e-14
        )

    def test_translation_equivariance(self, grid, density):
        """Test that shifting m by whole cells shifts U by the same cells."""
        terminal = convolution_terminal(grid)
        base = eval_linear_master(terminal, 0.2, density, 0.5).values
        for shift in (1, 3, 7):
            moved = GridDensity(grid, np.roll(density.values, shift))
            out = eval_linear_master(terminal, 0.2, moved, 0.5).values
            np.testing.assert_allclose(np.roll(out, -shift), base, atol=1e-12)

    def test_semigroup(self):
        """Test that composing two durations equals one combined duration."""
        grid = TorusGrid(cells=32)
        terminal = nonlinear_terminal(grid)
        rng = np.random.default_rng(4)
        samples = [smooth_random_density(grid, rng) for _ in range(3)]
        assert semigroup_check(terminal, 0.1, 0.15, 1.0, samples) <= 1e-8

    def test_flat_derivative_matches_difference(self, grid, density, direction):
        """Test dU/dm of the linear master equation against a central difference."""
        terminal = nonlinear_terminal(grid)
        step = 1e-4
        exact = dm_linear_master(terminal, 0.2, density, direction, 0.5).values
        plus = eval_linear_master(terminal, 0.2, perturbed(density, direction, step), 0.5).values
        minus = eval_linear_master(terminal, 0.2, perturbed(density, direction, -step), 0.5).values
        np.testing.assert_allclose(exact, (plus - minus) / (2 * step), atol=1e-6)

    def test_flat_derivative_normalization(self, grid, density):
        """Test that the direction m gives zero."""
        terminal = nonlinear_terminal(grid)
        np.testing.assert_allclose(dm_linear_master(terminal, 0.2, density, density.values, 0.5).values, 0.0, atol=1e-13)

    def test_functional_wraps_evaluator(self, grid, density, direction):
        """Test that the functional form agrees with the evaluators."""
        terminal = nonlinear_terminal(grid)
        functional = LinearMasterFunctional(terminal, 0.2, 0.5)
        np.testing.assert_array_equal(
            functional.evaluate(density), eval_linear_master(terminal, 0.2, density, 0.5).values
        )
        np.testing.assert_array_equal(
            functional.flat_derivative(density, direction),
            dm_linear_master(terminal, 0.2, density, direction, 0.5).values,
        )


class TestPackageExports:
    """Tests for the public names of the subpackages."""

    @pytest.mark.parametrize(
        "package",
        ["cli", "major", "master", "measures", "mfg", "pde", "splitting", "utils"],
    )
    def test_all_names_resolve(self, package):
        """Test that every name listed in __all__ is importable from the subpackage."""
        import importlib

        module = importlib.import_module(f"mfg_master.{package}")
        missing = [name for name in getattr(module, "__all__", []) if not hasattr(module, name)]
        assert missing == []

    def test_master_exports_audits(self):
        """Test that the Lipschitz-in-m audit is reachable from the master package."""
        import mfg_master.master as master
        from mfg_master.master.first_order import lipschitz_in_m_audit as defined

        assert "lipschitz_in_m_audit" in master.__all__
        assert master.lipschitz_in_m_audit is defined
