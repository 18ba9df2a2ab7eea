"""Legacy VTK and CSV writers for meshes, traces and lab reports."""

import csv
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from contracts.dto import BoundSequence, ChainReport, FixedPointTrajectory, OptimizerTrace
from .fields import ScalarField, Transformation, VectorField, identity_transformation


PathLike = Union[str, Path]

TRACE_COLUMNS = ["iter", "ssd", "jac_residual", "curl_residual", "min_jacobian", "sigma"]
BOUND_COLUMNS = ["k", "bound_u", "bound_grad", "bound_lap", "convergent"]
CHAIN_COLUMNS = ["trial", "label", "kind", "relation", "lhs", "rhs", "holds"]
FIXED_POINT_COLUMNS = ["m", "u_l2", "grad_l2", "lap_l2", "grad_f_l2", "eps_squared_bounds_grad_f", "product_bound", "diverged"]


def _flag(value: bool) -> int:
    return 1 if value else 0


def _points(transformation: Transformation) -> np.ndarray:
    """Node coordinates as rows, first index fastest, z = 0 for planar meshes."""
    grid = transformation.grid
    columns = [part.reshape(-1, order="F") for part in transformation.positions.values]
    if grid.dim == 2:
        columns.append(np.zeros(grid.points_per_axis**2))
    return np.column_stack(columns)


def write_vtk(
    transformation: Transformation,
    path: PathLike,
    *,
    scalars: Optional[dict[str, ScalarField]] = None,
    title: str = "divcurl mesh",
) -> Path:
    """Write a legacy ASCII STRUCTURED_GRID; optional scalar fields go out as POINT_DATA."""
    path = Path(path)
    grid = transformation.grid
    points = _points(transformation)
    dimensions = [grid.points_per_axis] * grid.dim + ([1] if grid.dim == 2 else [])

    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_GRID",
        "DIMENSIONS " + " ".join(str(value) for value in dimensions),
        f"POINTS {len(points)} double",
    ]
    lines.extend(" ".join(repr(float(value)) for value in row) for row in points)

    if scalars:
        lines.append(f"POINT_DATA {len(points)}")
        for name, field in scalars.items():
            if field.grid != grid:
                raise ValueError(f"scalar '{name}' does not live on the mesh grid")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(repr(float(value)) for value in field.values.reshape(-1, order="F"))

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def write_field_vtk(field: Union[ScalarField, VectorField, Transformation], path: PathLike) -> Path:
    """VTK export of whatever an FLD1 file holds: meshes as points, scalars on the identity lattice."""
    if isinstance(field, Transformation):
        return write_vtk(field, path)
    lattice = identity_transformation(field.grid)
    if isinstance(field, ScalarField):
        return write_vtk(lattice, path, scalars={"value": field})
    return write_vtk(lattice, path, scalars={f"component_{index}": part for index, part in enumerate(field.components)})


def _write_rows(path: PathLike, header: list[str], rows: Iterable[list]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_trace_csv(trace: OptimizerTrace, path: PathLike, *, reference_column: Optional[str] = None) -> Path:
    header = list(TRACE_COLUMNS)
    if reference_column:
        header.append(reference_column)
    rows = []
    for record in trace.records:
        row = [
            record.iteration,
            repr(record.ssd),
            repr(record.jac_residual),
            repr(record.curl_residual),
            repr(record.min_jacobian),
            repr(record.sigma),
        ]
        if reference_column:
            row.append(repr(record.reference_error) if record.reference_error is not None else "")
        rows.append(row)
    return _write_rows(path, header, rows)


def write_bounds_csv(sequence: BoundSequence, path: PathLike) -> Path:
    flag = _flag(sequence.convergent)
    rows = [[row.k, repr(row.bound_u), repr(row.bound_grad), repr(row.bound_lap), flag] for row in sequence.rows]
    return _write_rows(path, BOUND_COLUMNS, rows)


def write_chain_csv(reports: Iterable[ChainReport], path: PathLike) -> Path:
    rows = []
    for trial, report in enumerate(reports):
        for row in report.rows:
            rows.append([trial, row.label, row.kind, row.relation, repr(row.lhs), repr(row.rhs), _flag(row.holds)])
    return _write_rows(path, CHAIN_COLUMNS, rows)


def write_fixed_point_csv(trajectory: FixedPointTrajectory, path: PathLike) -> Path:
    rows = [
        [
            step.m,
            repr(step.norms.u_l2),
            repr(step.norms.grad_l2),
            repr(step.norms.lap_l2),
            repr(step.grad_f_l2),
            _flag(step.eps_squared_bounds_grad_f),
            repr(step.product_bound),
            0,
        ]
        for step in trajectory.steps
    ]
    if trajectory.diverged and rows:
        rows[-1][-1] = 1
    return _write_rows(path, FIXED_POINT_COLUMNS, rows)
