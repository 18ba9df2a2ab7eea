import unittest

import numpy as np
from PIL import Image

from contracts.dto import OptimizerConfig, SolverConfig
from mesh_engine.diffops import jacobian_det
from mesh_engine.errors import GridMismatchError
from mesh_engine.experiments import example_target, swirl_displacement
from mesh_engine.fields import (
    GridSpec,
    ScalarField,
    Transformation,
    VectorField,
    identity_transformation,
    interior_l2_norm,
    max_norm,
)
from mesh_engine.monitor import MonitorPair, monitor_from_image, monitor_from_transformation, zero_curl
from mesh_engine.optimizer import (
    fold_check,
    jacobian_residual,
    minimize,
    optimizer_step,
    reconstruct,
    residual_cost,
    ssd,
)


def _unit_monitor(grid: GridSpec, curl_enabled: bool = False) -> MonitorPair:
    return MonitorPair(f0=ScalarField.constant(grid, 1.0), g0=zero_curl(grid), curl_enabled=curl_enabled)


class CostTest(unittest.TestCase):
    def test_identity_against_unit_monitor(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=17)

        self.assertLess(ssd(identity_transformation(grid), _unit_monitor(grid, curl_enabled=True)), 1e-25)

    def test_single_spike(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=17)
        values = np.ones(grid.shape)
        values[5, 9] += 0.3
        cost = residual_cost(identity_transformation(grid), ScalarField(grid, values))

        self.assertAlmostEqual(cost, 0.5 * grid.cell_volume * 0.09, delta=1e-12)

    def test_boundary_nodes_are_not_penalized(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=9)
        values = np.ones(grid.shape)
        values[0, 4] = 5.0

        self.assertLess(residual_cost(identity_transformation(grid), ScalarField(grid, values)), 1e-25)

    def test_target_against_its_own_monitor(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=33)
        target = example_target(grid, 0.05)
        monitor = monitor_from_transformation(target, use_curl=True)

        self.assertLess(ssd(target, monitor), 1e-8)
        self.assertLess(abs(monitor.normalization_defect), 1e-3)

    def test_grid_mismatch(self) -> None:
        monitor = _unit_monitor(GridSpec(dim=2, points_per_axis=9))

        with self.assertRaises(GridMismatchError):
            ssd(identity_transformation(GridSpec(dim=2, points_per_axis=17)), monitor)


class FoldCheckTest(unittest.TestCase):
    def test_identity(self) -> None:
        grid = GridSpec(dim=3, points_per_axis=7)

        self.assertAlmostEqual(fold_check(identity_transformation(grid)), 1.0, places=12)

    def test_small_smooth_displacement_stays_unfolded(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=33)

        self.assertGreater(fold_check(example_target(grid, 0.01)), 0.0)

    def test_crossed_node_folds(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=9)
        positions = identity_transformation(grid).positions.values.copy()
        positions[0, 3, 4] = 0.9
        crossed = Transformation(grid, VectorField(grid, positions))

        self.assertLess(fold_check(crossed), 0.0)


class OptimizerStepTest(unittest.TestCase):
    def test_zero_sigma_keeps_start(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=17)
        start = example_target(grid, 0.02)
        monitor = monitor_from_transformation(example_target(grid, 0.05), use_curl=True)
        candidate, cost = optimizer_step(start, monitor, 0.0)

        np.testing.assert_array_equal(candidate.positions.values, start.positions.values)
        self.assertEqual(cost, ssd(start, monitor))

    def test_matched_monitor_gives_no_motion(self) -> None:
        grid = GridSpec(dim=3, points_per_axis=9)
        candidate, cost = optimizer_step(identity_transformation(grid), _unit_monitor(grid, True), 1.0)

        self.assertLess(max_norm(candidate.displacement), 1e-12)
        self.assertLess(cost, 1e-25)

    def test_first_step_decreases_cost(self) -> None:
        for dim, points, use_curl in ((2, 17, True), (3, 9, False)):
            grid = GridSpec(dim=dim, points_per_axis=points)
            monitor = monitor_from_transformation(example_target(grid, 0.03), use_curl=use_curl)
            start = identity_transformation(grid)
            candidate, cost = optimizer_step(start, monitor, 0.5)

            self.assertLess(cost, ssd(start, monitor))
            np.testing.assert_array_equal(candidate.positions.values[:, grid.boundary_mask()], start.positions.values[:, grid.boundary_mask()])


class MinimizeTest(unittest.TestCase):
    def test_matched_monitor_returns_start(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=17)
        start = identity_transformation(grid)
        phi, trace = minimize(start, _unit_monitor(grid))

        self.assertIs(phi, start)
        self.assertEqual(trace.accepted_iterations, 0)
        self.assertEqual(trace.status, "converged")
        self.assertFalse(trace.folded)

    def test_reconstruction_trace_is_monotone(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=33)
        target = example_target(grid, 0.05)
        phi, trace = reconstruct(target, use_curl=True, config=OptimizerConfig(max_outer=200))
        costs = [record.ssd for record in trace.records]

        self.assertTrue(all(later < earlier for earlier, later in zip(costs, costs[1:])))
        self.assertLess(costs[-1], 1e-2 * costs[0])
        self.assertLess(trace.records[-1].reference_error, trace.records[0].reference_error)
        self.assertGreater(trace.final.min_jacobian, 0.0)
        self.assertIsNotNone(trace.normalization_defect)

    def test_boundary_is_preserved(self) -> None:
        grid = GridSpec(dim=3, points_per_axis=9)
        monitor = monitor_from_transformation(example_target(grid, 0.05), use_curl=True)
        phi, _ = minimize(identity_transformation(grid), monitor, OptimizerConfig(max_outer=20))
        mask = grid.boundary_mask()

        np.testing.assert_array_equal(
            phi.positions.values[:, mask], identity_transformation(grid).positions.values[:, mask]
        )

    def test_sor_backend_drives_the_same_descent(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=17)
        monitor = monitor_from_transformation(example_target(grid, 0.05), use_curl=False)
        spectral = OptimizerConfig(max_outer=5)
        sor = OptimizerConfig(max_outer=5, solver=SolverConfig(backend="sor", residual_tol=1e-12))
        phi_spectral, _ = minimize(identity_transformation(grid), monitor, spectral)
        phi_sor, _ = minimize(identity_transformation(grid), monitor, sor)

        np.testing.assert_allclose(phi_sor.positions.values, phi_spectral.positions.values, atol=1e-9)

    def test_solver_failure_is_recorded(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=17)
        monitor = monitor_from_transformation(example_target(grid, 0.05), use_curl=False)
        config = OptimizerConfig(solver=SolverConfig(backend="sor", max_iterations=10, residual_tol=1e-12))
        phi, trace = minimize(identity_transformation(grid), monitor, config)

        self.assertEqual(trace.status, "solver_failed")
        self.assertIn("did not converge", trace.message)
        self.assertEqual(trace.accepted_iterations, 0)
        self.assertEqual(max_norm(phi.displacement), 0.0)

    def test_swirl_target_is_recovered_only_with_curl(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=17)
        target = Transformation.from_displacement(swirl_displacement(grid, 0.01))
        config = OptimizerConfig(max_outer=100)
        with_curl, _ = reconstruct(target, use_curl=True, config=config)
        without_curl, trace = reconstruct(target, use_curl=False, config=config)

        swirl_size = max_norm(target.displacement)
        self.assertLess(max_norm(with_curl.displacement.with_values(with_curl.positions.values - target.positions.values)), 0.2 * swirl_size)
        self.assertGreater(max_norm(without_curl.positions.with_values(without_curl.positions.values - target.positions.values)), 0.5 * swirl_size)
        self.assertLess(jacobian_residual(without_curl, monitor_from_transformation(target, False)), 1e-2)

    def test_image_monitor_mesh_is_unfolded_and_accurate(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=65)
        yy, xx = np.mgrid[0:80, 0:80]
        pixels = (128 + 100 * np.sin(xx / 9.0) * np.cos(yy / 7.0)).astype(np.uint8)
        monitor = monitor_from_image(Image.fromarray(pixels), grid)

        phi, trace = minimize(identity_transformation(grid), monitor)

        self.assertNotEqual(trace.status, "solver_failed")
        self.assertFalse(trace.folded)
        self.assertGreater(trace.final.min_jacobian, 0.0)
        self.assertGreater(fold_check(phi), 0.0)
        self.assertLess(jacobian_residual(phi, monitor) / interior_l2_norm(monitor.f0), 0.1)


class ReconstructTest(unittest.TestCase):
    def test_identity_is_recovered_exactly(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=17)
        identity = identity_transformation(grid)
        phi, trace = reconstruct(identity, use_curl=True)

        self.assertEqual(max_norm(phi.displacement), 0.0)
        self.assertEqual(trace.final.reference_error, 0.0)

    def test_jacobian_of_result_tracks_target(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=33)
        target = example_target(grid, 0.05)
        phi, trace = reconstruct(target, use_curl=True, config=OptimizerConfig(max_outer=200))
        monitor = monitor_from_transformation(target, use_curl=True)
        initial = jacobian_residual(identity_transformation(grid), monitor)

        self.assertLess(jacobian_residual(phi, monitor), 0.1 * initial)
        self.assertGreater(float(np.min(jacobian_det(phi).values)), 0.0)


if __name__ == "__main__":
    unittest.main()
