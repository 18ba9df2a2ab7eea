import os
from functools import lru_cache

from contracts.dto import OptimizerConfig, SolverConfig


_BACKENDS = {"sine_spectral", "sor"}


class EngineSettings:
    """Engine defaults loaded from environment variables.

    Every value has a built-in default, so the engine works without any
    environment; the variables only override what `SolverConfig` and
    `OptimizerConfig` would otherwise use.
    """

    def __init__(self) -> None:
        self.solver_backend = os.getenv("MESH_SOLVER_BACKEND", "sine_spectral").strip().lower()
        self.residual_tol = self._float_from_env("MESH_RESIDUAL_TOL", default=1e-10)
        self.sor_omega = self._float_from_env("MESH_SOR_OMEGA", default=1.9)
        self.step_sigma = self._float_from_env("MESH_STEP_SIGMA", default=0.1)
        self.max_outer = self._int_from_env("MESH_MAX_OUTER", default=500)

        if self.solver_backend not in _BACKENDS:
            raise RuntimeError(
                f"MESH_SOLVER_BACKEND must be one of: {', '.join(sorted(_BACKENDS))}"
            )
        if self.residual_tol <= 0:
            raise RuntimeError("MESH_RESIDUAL_TOL must be positive")
        if not 0.0 < self.sor_omega < 2.0:
            raise RuntimeError("MESH_SOR_OMEGA must lie in (0, 2)")
        if self.step_sigma <= 0:
            raise RuntimeError("MESH_STEP_SIGMA must be positive")
        if self.max_outer <= 0:
            raise RuntimeError("MESH_MAX_OUTER must be a positive integer")

    def _int_from_env(self, key: str, default: int) -> int:
        raw = os.getenv(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise RuntimeError(f"{key} must be an integer") from exc

    def _float_from_env(self, key: str, default: float) -> float:
        raw = os.getenv(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise RuntimeError(f"{key} must be a number") from exc


@lru_cache(maxsize=1)
def get_settings() -> EngineSettings:
    return EngineSettings()


def default_solver_config(settings: EngineSettings | None = None) -> SolverConfig:
    settings = settings or get_settings()
    return SolverConfig(
        backend=settings.solver_backend,
        residual_tol=settings.residual_tol,
        sor_omega=settings.sor_omega,
    )


def default_optimizer_config(settings: EngineSettings | None = None) -> OptimizerConfig:
    settings = settings or get_settings()
    return OptimizerConfig(
        step_sigma=settings.step_sigma,
        max_outer=settings.max_outer,
        solver=default_solver_config(settings),
    )
