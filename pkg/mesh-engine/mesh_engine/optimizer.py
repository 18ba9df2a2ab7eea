"""Minimization of the SSD functional by repeated div-curl corrections.

Each step prescribes control functions proportional to the monitor residuals,
f = sigma * (f0 - J(phi)) and g = sigma * (g0 - curl(phi)), solves the
div-curl system for a zero-boundary correction u, and moves phi to phi + u.
A backtracking line search on sigma keeps the accepted SSD values strictly
decreasing.
"""

import logging
from typing import Optional, Union

import numpy as np

from contracts.dto import OptimizerConfig, OptimizerTrace, TraceRecord
from .diffops import curl, jacobian_det
from .errors import GridMismatchError, SolverError
from .fields import ScalarField, Transformation, VectorField, identity_transformation, interior_l2_norm, l2_norm
from .monitor import MonitorPair, monitor_from_transformation, project_divergence_free, zero_curl
from .poisson import solve_div_curl


logger = logging.getLogger(__name__)

CurlTarget = Union[ScalarField, VectorField]


def _require_grid(phi: Transformation, f0: ScalarField) -> None:
    if phi.grid != f0.grid:
        raise GridMismatchError(f"transformation grid {phi.grid} does not match monitor grid {f0.grid}")


def residual_cost(phi: Transformation, f0: ScalarField, g0: Optional[CurlTarget] = None) -> float:
    """0.5 * h^dim * sum over interior nodes of (J - f0)^2 (+ |curl - g0|^2 when g0 is given)."""
    _require_grid(phi, f0)
    inner = phi.grid.interior
    total = float(np.sum(np.square(jacobian_det(phi).values - f0.values)[inner]))
    if g0 is not None:
        mismatch = curl(phi.positions).stacked() - g0.stacked()
        total += float(np.sum(np.square(mismatch)[(slice(None), *inner)]))
    return 0.5 * phi.grid.cell_volume * total


def ssd(phi: Transformation, monitor: MonitorPair) -> float:
    return residual_cost(phi, monitor.f0, monitor.g0 if monitor.curl_enabled else None)


def jacobian_residual(phi: Transformation, monitor: MonitorPair) -> float:
    _require_grid(phi, monitor.f0)
    return interior_l2_norm(ScalarField(phi.grid, jacobian_det(phi).values - monitor.f0.values))


def curl_residual(phi: Transformation, monitor: MonitorPair) -> float:
    _require_grid(phi, monitor.f0)
    current = curl(phi.positions)
    return interior_l2_norm(current.with_values(current.values - monitor.g0.values))


def fold_check(phi: Transformation) -> float:
    return float(np.min(jacobian_det(phi).values))


def optimizer_step(
    phi_old: Transformation,
    monitor: MonitorPair,
    sigma: float,
    config: Optional[OptimizerConfig] = None,
) -> tuple[Transformation, float]:
    """One residual-driven div-curl correction; returns the candidate and its SSD."""
    config = config or OptimizerConfig()
    _require_grid(phi_old, monitor.f0)
    grid = phi_old.grid

    f = ScalarField(grid, sigma * (monitor.f0.values - jacobian_det(phi_old).values))
    if monitor.curl_enabled:
        current = curl(phi_old.positions)
        g = current.with_values(sigma * (monitor.g0.values - current.values))
        if grid.dim == 3:
            g = project_divergence_free(g, config.solver)
    else:
        g = zero_curl(grid)

    solution = solve_div_curl(f, g, config.solver)
    candidate = phi_old.moved_by(solution.u)
    logger.debug(
        "Computed div-curl correction",
        extra={
            "event": "engine.optimizer.step",
            "sigma": sigma,
            "div_residual": solution.div_residual,
            "curl_residual": solution.curl_residual,
        },
    )
    return candidate, ssd(candidate, monitor)


def _record(
    iteration: int,
    phi: Transformation,
    monitor: MonitorPair,
    cost: float,
    sigma: float,
    reference: Optional[Transformation],
) -> TraceRecord:
    reference_error = None
    if reference is not None:
        reference_error = l2_norm(VectorField(phi.grid, phi.positions.values - reference.positions.values))
    return TraceRecord(
        iteration=iteration,
        ssd=cost,
        jac_residual=jacobian_residual(phi, monitor),
        curl_residual=curl_residual(phi, monitor),
        min_jacobian=fold_check(phi),
        sigma=sigma,
        reference_error=reference_error,
    )


def minimize(
    start: Transformation,
    monitor: MonitorPair,
    config: Optional[OptimizerConfig] = None,
    *,
    reference: Optional[Transformation] = None,
) -> tuple[Transformation, OptimizerTrace]:
    """Backtracking descent on the SSD functional.

    Non-convergence never raises: the trace status tells why the loop stopped
    (``converged``, ``stalled``, ``step_exhausted``, ``max_outer`` or
    ``solver_failed``).
    """
    config = config or OptimizerConfig()
    current = start
    cost = ssd(current, monitor)
    records = [_record(0, current, monitor, cost, 0.0, reference)]
    sigma = config.step_sigma
    status = "max_outer"
    message = None

    try:
        for outer in range(1, config.max_outer + 1):
            if cost <= config.ssd_abs_tol:
                status = "converged"
                break

            current_unfolded = records[-1].min_jacobian > 0.0
            accepted = None
            for _ in range(config.max_backtracks + 1):
                candidate, candidate_cost = optimizer_step(current, monitor, sigma, config)
                folded = config.reject_folds and current_unfolded and fold_check(candidate) <= 0.0
                if candidate_cost < cost and not folded:
                    accepted = (candidate, candidate_cost)
                    break
                sigma *= config.backtrack_factor

            if accepted is None:
                status = "step_exhausted"
                break

            previous = cost
            current, cost = accepted
            records.append(_record(outer, current, monitor, cost, sigma, reference))
            logger.debug(
                "Accepted optimizer iteration",
                extra={
                    "event": "engine.optimizer.iteration",
                    "iteration": outer,
                    "ssd": cost,
                    "sigma": sigma,
                },
            )
            if (previous - cost) / previous < config.ssd_rel_tol:
                status = "stalled"
                break
            sigma = min(sigma * config.step_growth, config.sigma_max)
        else:
            status = "max_outer"
        if cost <= config.ssd_abs_tol:
            status = "converged"
    except SolverError as exc:
        status = "solver_failed"
        message = str(exc)
        logger.warning(
            "Optimizer stopped on solver failure",
            extra={"event": "engine.optimizer.solver_failed", "iterations": len(records) - 1, "error": message},
        )

    trace = OptimizerTrace(
        records=records,
        status=status,
        folded=records[-1].min_jacobian <= 0.0,
        message=message,
    )
    if trace.folded:
        logger.warning(
            "Optimizer result is folded",
            extra={"event": "engine.optimizer.folded", "min_jacobian": trace.final.min_jacobian},
        )
    logger.info(
        "Optimizer finished",
        extra={
            "event": "engine.optimizer.finished",
            "status": trace.status,
            "iterations": trace.accepted_iterations,
            "ssd": trace.final.ssd,
            "min_jacobian": trace.final.min_jacobian,
        },
    )
    return current, trace


def reconstruct(
    t0: Transformation,
    use_curl: bool,
    config: Optional[OptimizerConfig] = None,
    *,
    start: Optional[Transformation] = None,
) -> tuple[Transformation, OptimizerTrace]:
    """Recover t0 from its Jacobian determinant (T1) or determinant and curl (T2)."""
    monitor = monitor_from_transformation(t0, use_curl)
    phi, trace = minimize(start or identity_transformation(t0.grid), monitor, config, reference=t0)
    trace.normalization_defect = monitor.normalization_defect
    return phi, trace
