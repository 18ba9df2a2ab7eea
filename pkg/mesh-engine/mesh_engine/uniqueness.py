"""Discrete checks of the uniqueness argument for div-curl transformations.

All norms here use the staggered pair (forward gradient, five/seven-point
Laplacian) so that summation by parts holds exactly for zero-boundary fields.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from contracts.dto import (
    BoundRow,
    BoundSequence,
    ChainReport,
    ChainRow,
    FixedPointStep,
    FixedPointTrajectory,
    NormTriple,
    SolverConfig,
)
from .diffops import STAGGERED, derivative_matrix, expansion_f_from_matrix, gradient, laplacian
from .errors import BoundaryError
from .fields import ScalarField, VectorField, boundary_max, interior_l2_norm
from .poisson import solve_vector_dirichlet


logger = logging.getLogger(__name__)

GREEN_SLACK = 1e-12
CAUCHY_SCHWARZ_SLACK = 1e-12
POINCARE_SLACK = 1e-10
DIVERGENCE_FACTOR = 10.0


@dataclass(frozen=True)
class _Moments:
    u_sq: float
    grad_sq: float
    lap_sq: float
    u_dot_lap: float

    def triple(self) -> NormTriple:
        return NormTriple(
            u_l2=math.sqrt(self.u_sq),
            grad_l2=math.sqrt(self.grad_sq),
            lap_l2=math.sqrt(self.lap_sq),
        )


def _require_zero_boundary(u: VectorField) -> None:
    if boundary_max(u) != 0.0:
        raise BoundaryError("field does not vanish on the boundary: not in H¹₀ surrogate")


def _moments(u: VectorField) -> _Moments:
    _require_zero_boundary(u)
    weight = u.grid.cell_volume
    grad_sq = 0.0
    for part in u.components:
        grad_sq += float(np.sum(np.square(gradient(part, STAGGERED).values)))
    lap = laplacian(u).values
    return _Moments(
        u_sq=weight * float(np.sum(np.square(u.values))),
        grad_sq=weight * grad_sq,
        lap_sq=weight * float(np.sum(np.square(lap))),
        u_dot_lap=weight * float(np.sum(u.values * lap)),
    )


def norm_triple(u: VectorField) -> NormTriple:
    return _moments(u).triple()


def green_identity_gap(u: VectorField) -> float:
    """| |grad u|^2 - |<u, laplacian u>| |, zero up to rounding."""
    moments = _moments(u)
    return abs(moments.grad_sq - abs(moments.u_dot_lap))


def interpolation_check(u: VectorField) -> tuple[float, float]:
    moments = _moments(u)
    return moments.grad_sq, math.sqrt(moments.u_sq) * math.sqrt(moments.lap_sq)


def poincare_check(u: VectorField, c: float) -> tuple[float, float]:
    moments = _moments(u)
    return moments.u_sq, c * moments.grad_sq


def bound_sequence(epsilon: float, c: float, k_max: int) -> BoundSequence:
    """Closed-form bounds C^(1+k/2) eps^(2+k), C^((1+k)/2) eps^(2+k), C^(k/2) eps^(2+k)."""
    if epsilon <= 0 or c <= 0:
        raise ValueError("epsilon and c must be positive")
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    rows = []
    for k in range(k_max + 1):
        power = epsilon ** (2 + k)
        rows.append(
            BoundRow(
                k=k,
                bound_u=c ** (1.0 + k / 2.0) * power,
                bound_grad=c ** (0.5 + k / 2.0) * power,
                bound_lap=c ** (k / 2.0) * power,
            )
        )
    return BoundSequence(epsilon=epsilon, c=c, rows=rows)


def chain_report(u: VectorField, c: float) -> ChainReport:
    moments = _moments(u)
    norms = moments.triple()
    epsilon = norms.epsilon
    u_l2, grad_l2, lap_l2 = norms.u_l2, norms.grad_l2, norms.lap_l2
    pairing = abs(moments.u_dot_lap)
    product = u_l2 * lap_l2

    def inequality(label: str, relation: str, lhs: float, rhs: float, slack: float) -> ChainRow:
        return ChainRow(label=label, relation=relation, lhs=lhs, rhs=rhs, holds=lhs <= rhs * (1.0 + slack))

    def claim(label: str, relation: str, lhs: float, rhs: float) -> ChainRow:
        return ChainRow(label=label, relation=relation, kind="claim", lhs=lhs, rhs=rhs, holds=lhs < rhs)

    green_gap = abs(moments.grad_sq - pairing)
    rows = [
        ChainRow(
            label="green",
            relation="|grad u|^2 = |<u, lap u>|",
            lhs=moments.grad_sq,
            rhs=pairing,
            holds=green_gap <= GREEN_SLACK * max(1.0, moments.grad_sq),
        ),
        inequality("cauchy_schwarz", "|grad u|^2 <= |u| |lap u|", moments.grad_sq, product, CAUCHY_SCHWARZ_SLACK),
        inequality("poincare", "|u|^2 <= C |grad u|^2", moments.u_sq, c * moments.grad_sq, POINCARE_SLACK),
        inequality("poincare_interpolation", "|u|^2 <= C |u| |lap u|", moments.u_sq, c * product, POINCARE_SLACK),
        claim("laplacian_eps_squared", "|lap u| < eps^2", lap_l2, epsilon**2),
        inequality("u_by_laplacian", "|u| <= C |lap u|", u_l2, c * lap_l2, POINCARE_SLACK),
        claim("u_eps_squared", "|u| < C eps^2", u_l2, c * epsilon**2),
        inequality(
            "gradient_interpolation",
            "|grad u| <= (|u| |lap u|)^(1/2)",
            grad_l2,
            math.sqrt(product),
            CAUCHY_SCHWARZ_SLACK,
        ),
        claim("gradient_eps_squared", "|grad u| < C^(1/2) eps^2", grad_l2, math.sqrt(c) * epsilon**2),
    ]
    return ChainReport(norms=norms, c=c, epsilon=epsilon, rows=rows)


def _product_bound(d: np.ndarray, grid_points: int, h: float) -> float:
    """Bound on the interior L2 norm of grad F from max-norms of D and its central quotients."""
    dim = d.shape[0]
    inner = (slice(None), slice(None)) + (slice(1, -1),) * dim
    m1 = float(np.max(np.abs(d)))
    m2 = 0.0
    for axis in range(dim):
        second = np.gradient(d, h, axis=2 + axis, edge_order=2)
        m2 = max(m2, float(np.max(np.abs(second[inner]))))
    if dim == 2:
        coefficient = 4.0 * m1 * m2
    else:
        coefficient = (12.0 + 18.0 * m1) * m1 * m2
    return coefficient * math.sqrt(dim * h**dim * (grid_points - 2) ** dim)


def fixed_point_iteration(
    seed: VectorField,
    m_max: int,
    config: Optional[SolverConfig] = None,
) -> FixedPointTrajectory:
    """Iterate u_{m+1} = solve(laplacian u = grad F(u_m)) from a zero-boundary seed.

    Stops after m_max solves, at an exactly zero iterate, or when the norms
    grow past ten times the seed's epsilon (reported as ``diverged``).
    """
    grid = seed.grid
    h = grid.spacing
    seed_epsilon = norm_triple(seed).epsilon
    steps: list[FixedPointStep] = []
    diverged = False
    u = seed

    for m in range(m_max + 1):
        if not np.all(np.isfinite(u.values)):
            diverged = True
            break
        with np.errstate(over="ignore", invalid="ignore"):
            norms = norm_triple(u)
            d = derivative_matrix(u)
            grad_f = gradient(ScalarField(grid, expansion_f_from_matrix(d)))
            grad_f_finite = bool(np.all(np.isfinite(grad_f.values)))
            grad_f_l2 = interior_l2_norm(grad_f) if grad_f_finite else math.inf
            product_bound = _product_bound(d, grid.points_per_axis, h) if grad_f_finite else math.inf

        steps.append(
            FixedPointStep(
                m=m,
                norms=norms,
                grad_f_l2=grad_f_l2,
                eps_squared_bounds_grad_f=grad_f_l2 < norms.epsilon**2,
                product_bound=product_bound,
            )
        )
        logger.debug(
            "Fixed-point iterate measured",
            extra={
                "event": "engine.uniqueness.fixed_point.step",
                "m": m,
                "u_l2": norms.u_l2,
                "grad_l2": norms.grad_l2,
                "lap_l2": norms.lap_l2,
            },
        )

        if not math.isfinite(norms.epsilon) or norms.epsilon > DIVERGENCE_FACTOR * seed_epsilon:
            diverged = True
            break
        if norms.epsilon == 0.0 or m == m_max:
            break
        if not grad_f_finite:
            diverged = True
            break
        u = solve_vector_dirichlet(grad_f, config)

    if diverged:
        logger.warning(
            "Fixed-point iteration left the contraction basin",
            extra={
                "event": "engine.uniqueness.fixed_point.diverged",
                "seed_epsilon": seed_epsilon,
                "steps": len(steps),
            },
        )
    return FixedPointTrajectory(steps=steps, diverged=diverged)
