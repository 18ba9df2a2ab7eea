"""Synthetic targets and the two reconstruction experiments."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from contracts.dto import OptimizerConfig, OptimizerTrace
from .diffops import curl, jacobian_det
from .fields import GridSpec, Transformation, VectorField, identity_transformation, l2_norm
from .monitor import MonitorPair, normalize_f0, zero_curl
from .optimizer import minimize, reconstruct
from .uniqueness import norm_triple


logger = logging.getLogger(__name__)


def _zero_boundary(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=np.float64)
    values[:, grid.boundary_mask()] = 0.0
    return values


def example_target(grid: GridSpec, amplitude: float = 0.05) -> Transformation:
    """T0 = id + amplitude * (sin(pi x) sin(2 pi y), sin(2 pi x) sin(pi y)), extended by sin(pi z) in 3D."""
    coords = grid.mesh()
    s1 = [np.sin(np.pi * c) for c in coords]
    s2 = [np.sin(2.0 * np.pi * c) for c in coords]
    if grid.dim == 2:
        parts = [s1[0] * s2[1], s2[0] * s1[1]]
    else:
        parts = [s1[0] * s2[1] * s1[2], s2[0] * s1[1] * s1[2], s1[0] * s1[1] * s2[2]]
    displacement = VectorField(grid, _zero_boundary(grid, amplitude * np.stack(parts)))
    return Transformation.from_displacement(displacement)


def swirl_displacement(grid: GridSpec, amplitude: float) -> VectorField:
    """Divergence-free rotation from the stream function amplitude * sin^2(pi x) sin^2(pi y)."""
    coords = grid.mesh()
    x, y = coords[0], coords[1]
    u1 = np.pi * np.sin(np.pi * x) ** 2 * np.sin(2.0 * np.pi * y)
    u2 = -np.pi * np.sin(2.0 * np.pi * x) * np.sin(np.pi * y) ** 2
    parts = [u1, u2]
    if grid.dim == 3:
        layer = np.sin(np.pi * coords[2])
        parts = [u1 * layer, u2 * layer, np.zeros(grid.shape)]
    return VectorField(grid, _zero_boundary(grid, amplitude * np.stack(parts)))


def compression_displacement(grid: GridSpec, amplitude: float) -> VectorField:
    """Curl-free displacement amplitude * grad(sin^2(pi x) sin^2(pi y) ...), zero on the boundary."""
    coords = grid.mesh()
    squares = [np.sin(np.pi * c) ** 2 for c in coords]
    parts = []
    for axis, c in enumerate(coords):
        part = np.pi * np.sin(2.0 * np.pi * c)
        for other in range(grid.dim):
            if other != axis:
                part = part * squares[other]
        parts.append(part)
    return VectorField(grid, _zero_boundary(grid, amplitude * np.stack(parts)))


def random_zero_boundary(grid: GridSpec, rng: np.random.Generator) -> VectorField:
    return VectorField(grid, _zero_boundary(grid, rng.standard_normal((grid.dim, *grid.shape))))


def smooth_seed(
    grid: GridSpec,
    amplitude: float,
    rng: np.random.Generator,
    modes: int = 2,
) -> VectorField:
    """Low sine-mode field scaled so the largest of its three norms equals amplitude."""
    if amplitude == 0.0:
        return VectorField.zeros(grid)
    coords = grid.mesh()
    values = np.zeros((grid.dim, *grid.shape))
    for wave in np.ndindex(*([modes] * grid.dim)):
        numbers = np.array(wave) + 1
        mode = np.ones(grid.shape)
        for k, c in zip(numbers, coords):
            mode = mode * np.sin(k * np.pi * c)
        weights = rng.standard_normal(grid.dim) / float(np.sum(numbers**2)) ** 2
        values += weights.reshape((grid.dim,) + (1,) * grid.dim) * mode
    field = VectorField(grid, _zero_boundary(grid, values))
    return field.with_values(field.values * (amplitude / norm_triple(field).epsilon))


@dataclass(frozen=True)
class ReconstructionComparison:
    target: Transformation
    without_curl: Transformation
    with_curl: Transformation
    trace_without_curl: OptimizerTrace
    trace_with_curl: OptimizerTrace
    error_without_curl: float
    error_with_curl: float
    target_displacement: float

    @property
    def relative_error_with_curl(self) -> float:
        if self.target_displacement == 0.0:
            return 0.0
        return self.error_with_curl / self.target_displacement


def _distance(first: Transformation, second: Transformation) -> float:
    return l2_norm(VectorField(first.grid, first.positions.values - second.positions.values))


def compare_reconstructions(
    t0: Transformation,
    config: Optional[OptimizerConfig] = None,
) -> ReconstructionComparison:
    """Reconstruct t0 from its Jacobian alone (T1) and from Jacobian and curl (T2)."""
    t1, trace1 = reconstruct(t0, use_curl=False, config=config)
    t2, trace2 = reconstruct(t0, use_curl=True, config=config)
    comparison = ReconstructionComparison(
        target=t0,
        without_curl=t1,
        with_curl=t2,
        trace_without_curl=trace1,
        trace_with_curl=trace2,
        error_without_curl=_distance(t1, t0),
        error_with_curl=_distance(t2, t0),
        target_displacement=l2_norm(t0.displacement),
    )
    logger.info(
        "Compared reconstructions",
        extra={
            "event": "engine.experiments.compare",
            "error_without_curl": comparison.error_without_curl,
            "error_with_curl": comparison.error_with_curl,
        },
    )
    return comparison


@dataclass(frozen=True)
class CurlEffect:
    without_swirl: Transformation
    with_swirl: Transformation
    trace_without_swirl: OptimizerTrace
    trace_with_swirl: OptimizerTrace
    distance: float


def curl_effect(
    grid: GridSpec,
    compression: float = 0.02,
    swirl: float = 0.02,
    config: Optional[OptimizerConfig] = None,
) -> CurlEffect:
    """Minimize one f0 against a zero curl target and against the curl of a swirl."""
    base = Transformation.from_displacement(compression_displacement(grid, compression))
    f0 = normalize_f0(jacobian_det(base))
    swirled = Transformation.from_displacement(swirl_displacement(grid, swirl))

    start = identity_transformation(grid)
    plain = MonitorPair(f0=f0, g0=zero_curl(grid), curl_enabled=True)
    rotated = MonitorPair(f0=f0, g0=curl(swirled.positions), curl_enabled=True)
    phi_a, trace_a = minimize(start, plain, config)
    phi_b, trace_b = minimize(start, rotated, config)
    return CurlEffect(
        without_swirl=phi_a,
        with_swirl=phi_b,
        trace_without_swirl=trace_a,
        trace_with_swirl=trace_b,
        distance=_distance(phi_a, phi_b),
    )
