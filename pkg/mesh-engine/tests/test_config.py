import os
import unittest
from unittest import mock

from mesh_engine.config import EngineSettings, default_optimizer_config


class EngineSettingsTest(unittest.TestCase):
    def test_defaults_without_environment(self) -> None:
        with mock.patch.dict(os.environ, {}, clear=True):
            config = default_optimizer_config(EngineSettings())

        self.assertEqual(config.step_sigma, 0.1)
        self.assertEqual(config.max_outer, 500)
        self.assertEqual(config.solver.backend, "sine_spectral")

    def test_environment_overrides(self) -> None:
        env = {"MESH_SOLVER_BACKEND": "SOR", "MESH_SOR_OMEGA": "1.5", "MESH_MAX_OUTER": "40"}
        with mock.patch.dict(os.environ, env, clear=True):
            config = default_optimizer_config(EngineSettings())

        self.assertEqual(config.solver.backend, "sor")
        self.assertEqual(config.solver.sor_omega, 1.5)
        self.assertEqual(config.max_outer, 40)

    def test_invalid_values_name_the_variable(self) -> None:
        cases = {
            "MESH_SOLVER_BACKEND": "multigrid",
            "MESH_SOR_OMEGA": "2.5",
            "MESH_MAX_OUTER": "many",
            "MESH_RESIDUAL_TOL": "0",
        }
        for key, value in cases.items():
            with mock.patch.dict(os.environ, {key: value}, clear=True):
                with self.assertRaisesRegex(RuntimeError, key):
                    EngineSettings()


if __name__ == "__main__":
    unittest.main()
