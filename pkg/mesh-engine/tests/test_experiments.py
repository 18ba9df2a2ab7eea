import unittest

import numpy as np

from contracts.dto import OptimizerConfig
from mesh_engine.diffops import curl, divergence
from mesh_engine.experiments import (
    compare_reconstructions,
    compression_displacement,
    curl_effect,
    example_target,
    random_zero_boundary,
    smooth_seed,
    swirl_displacement,
)
from mesh_engine.fields import GridSpec, boundary_max, interior_l2_norm, l2_norm
from mesh_engine.optimizer import fold_check
from mesh_engine.uniqueness import norm_triple


class SyntheticTargetTest(unittest.TestCase):
    def test_example_target_is_unfolded(self) -> None:
        for dim, points in ((2, 33), (3, 17)):
            grid = GridSpec(dim=dim, points_per_axis=points)
            target = example_target(grid, 0.05)

            self.assertGreater(fold_check(target), 0.0)
            self.assertGreater(l2_norm(target.displacement), 0.0)

    def test_swirl_is_divergence_free(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=65)
        swirl = swirl_displacement(grid, 1.0)

        self.assertLess(interior_l2_norm(divergence(swirl)), 0.05)
        self.assertGreater(interior_l2_norm(curl(swirl)), 1.0)
        self.assertEqual(boundary_max(swirl), 0.0)

    def test_compression_is_curl_free(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=65)
        compression = compression_displacement(grid, 1.0)

        self.assertLess(interior_l2_norm(curl(compression)), 0.05)
        self.assertGreater(interior_l2_norm(divergence(compression)), 1.0)
        self.assertEqual(boundary_max(compression), 0.0)

    def test_three_dimensional_swirl_has_flat_third_component(self) -> None:
        grid = GridSpec(dim=3, points_per_axis=9)
        swirl = swirl_displacement(grid, 0.1)

        np.testing.assert_array_equal(swirl.values[2], 0.0)
        self.assertEqual(boundary_max(swirl), 0.0)


class SeedTest(unittest.TestCase):
    def test_random_field_vanishes_on_boundary(self) -> None:
        grid = GridSpec(dim=3, points_per_axis=7)
        u = random_zero_boundary(grid, np.random.default_rng(41))

        self.assertEqual(boundary_max(u), 0.0)
        self.assertGreater(l2_norm(u), 0.0)

    def test_smooth_seed_is_scaled_to_amplitude(self) -> None:
        grid = GridSpec(dim=3, points_per_axis=17)
        seed = smooth_seed(grid, 0.25, np.random.default_rng(42))

        self.assertAlmostEqual(norm_triple(seed).epsilon, 0.25, places=12)
        self.assertEqual(boundary_max(seed), 0.0)

    def test_smooth_seed_is_reproducible(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=17)
        first = smooth_seed(grid, 0.1, np.random.default_rng(43))
        second = smooth_seed(grid, 0.1, np.random.default_rng(43))

        np.testing.assert_array_equal(first.values, second.values)

    def test_zero_amplitude(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=9)

        self.assertEqual(l2_norm(smooth_seed(grid, 0.0, np.random.default_rng(44))), 0.0)


class ReconstructionComparisonTest(unittest.TestCase):
    def test_curl_improves_reconstruction(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=33)
        comparison = compare_reconstructions(example_target(grid, 0.05), OptimizerConfig(max_outer=300))

        self.assertLess(comparison.error_with_curl, comparison.error_without_curl)
        self.assertLess(comparison.relative_error_with_curl, 0.05)
        self.assertFalse(comparison.trace_with_curl.folded)
        self.assertFalse(comparison.trace_without_curl.folded)


class CurlEffectTest(unittest.TestCase):
    def test_curl_target_changes_the_mesh(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=33)
        effect = curl_effect(grid, compression=0.002, swirl=0.005)

        self.assertGreater(effect.distance, 1e-9)
        self.assertLess(effect.trace_without_swirl.final.jac_residual, 5e-3)
        self.assertLess(effect.trace_with_swirl.final.jac_residual, 5e-3)
        self.assertLess(
            effect.trace_with_swirl.final.curl_residual, effect.trace_with_swirl.records[0].curl_residual
        )


if __name__ == "__main__":
    unittest.main()
