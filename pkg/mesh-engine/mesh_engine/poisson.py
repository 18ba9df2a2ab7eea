import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import fft

from contracts.dto import SolverConfig
from .diffops import curl, curl_from_matrix, derivative_matrix, divergence, gradient, laplacian
from .errors import GridMismatchError, NonFiniteFieldError, SolverDivergedError
from .fields import GridSpec, ScalarField, VectorField, interior_l2_norm


logger = logging.getLogger(__name__)

_SOR_CHECK_EVERY = 10


def _dirichlet_eigenvalues(grid: GridSpec) -> np.ndarray:
    """Eigenvalues of the interior (2*dim+1)-point Laplacian, broadcast over the sine modes."""
    h = grid.spacing
    modes = np.arange(1, grid.points_per_axis - 1)
    axis_values = (2.0 * np.cos(np.pi * modes * h) - 2.0) / (h * h)
    total = np.zeros((grid.points_per_axis - 2,) * grid.dim)
    for axis in range(grid.dim):
        shape = [1] * grid.dim
        shape[axis] = -1
        total = total + axis_values.reshape(shape)
    return total


def _solve_sine_spectral(rhs: np.ndarray, grid: GridSpec) -> np.ndarray:
    inner = grid.interior
    coefficients = fft.dstn(rhs[inner], type=1, norm="ortho")
    coefficients /= _dirichlet_eigenvalues(grid)
    solution = np.zeros(grid.shape)
    solution[inner] = fft.idstn(coefficients, type=1, norm="ortho")
    return solution


def _checkerboard(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    indices = np.indices((grid.points_per_axis - 2,) * grid.dim).sum(axis=0)
    red = indices % 2 == 0
    return red, ~red


def _interior_residual(solution: np.ndarray, rhs: np.ndarray, grid: GridSpec) -> np.ndarray:
    lap = laplacian(ScalarField(grid, solution)).values
    return (lap - rhs)[grid.interior]


def _solve_sor(rhs: np.ndarray, grid: GridSpec, config: SolverConfig) -> np.ndarray:
    h2 = grid.spacing**2
    dim = grid.dim
    inner = grid.interior
    omega = config.sor_omega
    max_iterations = config.resolve_max_iterations(grid.points_per_axis)
    rhs_norm = float(np.linalg.norm(rhs[inner]))

    solution = np.zeros(grid.shape)
    colors = _checkerboard(grid)
    relative = math.inf
    for sweep in range(1, max_iterations + 1):
        for mask in colors:
            neighbours = np.zeros((grid.points_per_axis - 2,) * dim)
            for axis in range(dim):
                plus = list(inner)
                minus = list(inner)
                plus[axis] = slice(2, None)
                minus[axis] = slice(None, -2)
                neighbours += solution[tuple(plus)] + solution[tuple(minus)]
            gauss_seidel = (neighbours - h2 * rhs[inner]) / (2.0 * dim)
            view = solution[inner]
            view[mask] += omega * (gauss_seidel[mask] - view[mask])

        if sweep % _SOR_CHECK_EVERY == 0 or sweep == max_iterations:
            relative = float(np.linalg.norm(_interior_residual(solution, rhs, grid))) / rhs_norm
            if not math.isfinite(relative):
                break
            if relative <= config.residual_tol:
                logger.debug(
                    "SOR converged",
                    extra={
                        "event": "engine.poisson.sor.converged",
                        "sweeps": sweep,
                        "relative_residual": relative,
                    },
                )
                return solution

    logger.warning(
        "SOR did not reach the residual tolerance",
        extra={
            "event": "engine.poisson.sor.diverged",
            "max_iterations": max_iterations,
            "relative_residual": relative,
            "residual_tol": config.residual_tol,
        },
    )
    raise SolverDivergedError(relative, max_iterations)


def solve_dirichlet(rhs: ScalarField, config: Optional[SolverConfig] = None) -> ScalarField:
    """Solve laplacian(s) = rhs on interior nodes with s = 0 on the boundary."""
    config = config or SolverConfig()
    grid = rhs.grid
    values = rhs.values
    if not np.all(np.isfinite(values)):
        raise NonFiniteFieldError()
    if not np.any(values[grid.interior]):
        return ScalarField.zeros(grid)

    if config.backend == "sine_spectral":
        solution = _solve_sine_spectral(values, grid)
    else:
        solution = _solve_sor(values, grid, config)
    return ScalarField(grid, solution)


def solve_vector_dirichlet(rhs: VectorField, config: Optional[SolverConfig] = None) -> VectorField:
    return VectorField.from_components([solve_dirichlet(part, config) for part in rhs.components])


def _require_grid(first: GridSpec, second: GridSpec) -> None:
    if first != second:
        raise GridMismatchError(f"grid mismatch: {first} vs {second}")


def assemble_divcurl_rhs(f: ScalarField, g: Union[VectorField, ScalarField]) -> VectorField:
    """Right-hand side of laplacian(u) = grad(div u) - curl(curl u), with div u = f and curl u = g.

    In 2D the scalar curl g = u2_x1 - u1_x2 gives (f_x1 - g_x2, f_x2 + g_x1).
    """
    _require_grid(f.grid, g.grid)
    grad_f = gradient(f).values
    if f.grid.dim == 2:
        if not isinstance(g, ScalarField):
            raise GridMismatchError("2D curl targets are scalar fields")
        grad_g = gradient(g).values
        return VectorField(f.grid, np.stack([grad_f[0] - grad_g[1], grad_f[1] + grad_g[0]]))

    if not isinstance(g, VectorField):
        raise GridMismatchError("3D curl targets are vector fields")
    return VectorField(f.grid, grad_f - curl_from_matrix(derivative_matrix(g)))


@dataclass(frozen=True)
class DivCurlSolution:
    u: VectorField
    div_residual: float
    curl_residual: float


def solve_div_curl(
    f: ScalarField,
    g: Union[VectorField, ScalarField],
    config: Optional[SolverConfig] = None,
) -> DivCurlSolution:
    """div u = f, curl u = g, u = 0 on the boundary, through the componentwise Poisson reduction."""
    u = solve_vector_dirichlet(assemble_divcurl_rhs(f, g), config)
    div_residual = interior_l2_norm(ScalarField(f.grid, divergence(u).values - f.values))
    curl_u = curl(u)
    curl_residual = interior_l2_norm(curl_u.with_values(curl_u.values - g.values))
    return DivCurlSolution(u=u, div_residual=div_residual, curl_residual=curl_residual)


def poincare_constant(grid: GridSpec) -> float:
    """1 / lambda_1 of the discrete Dirichlet Laplacian on the lattice."""
    h = grid.spacing
    smallest = grid.dim * (4.0 / (h * h)) * math.sin(math.pi * h / 2.0) ** 2
    return 1.0 / smallest
