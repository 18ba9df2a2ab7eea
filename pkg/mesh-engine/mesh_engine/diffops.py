"""Finite-difference operators on the unit-cube lattice.

Central quotients are second order with second-order one-sided stencils on
the faces (``numpy.gradient(..., edge_order=2)``). The staggered pair
(forward gradient, backward divergence) is the summation-by-parts pair:
for fields vanishing on the boundary, ``<u, laplacian(u)> = -|grad_+ u|^2``
holds exactly in the node-weighted inner product.
"""

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from .fields import ScalarField, Transformation, VectorField, lattice_positions


GradientScheme = Literal["central", "forward"]
DivergenceScheme = Literal["central", "backward"]


@dataclass(frozen=True)
class StencilConvention:
    gradient_scheme: GradientScheme = "central"
    divergence_scheme: DivergenceScheme = "central"


CENTRAL = StencilConvention()
STAGGERED = StencilConvention(gradient_scheme="forward", divergence_scheme="backward")


def _central(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    return np.gradient(values, h, axis=axis, edge_order=2)


def _forward(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.zeros_like(values)
    n = values.shape[axis]
    head = [slice(None)] * values.ndim
    tail = [slice(None)] * values.ndim
    head[axis] = slice(0, n - 1)
    tail[axis] = slice(1, n)
    out[tuple(head)] = (values[tuple(tail)] - values[tuple(head)]) / h
    return out


def _backward(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.zeros_like(values)
    n = values.shape[axis]
    head = [slice(None)] * values.ndim
    tail = [slice(None)] * values.ndim
    head[axis] = slice(0, n - 1)
    tail[axis] = slice(1, n)
    out[tuple(tail)] = (values[tuple(tail)] - values[tuple(head)]) / h
    return out


def _derivative(values: np.ndarray, axis: int, h: float, scheme: str) -> np.ndarray:
    if scheme == "central":
        return _central(values, axis, h)
    if scheme == "forward":
        return _forward(values, axis, h)
    if scheme == "backward":
        return _backward(values, axis, h)
    raise ValueError(f"unknown difference scheme '{scheme}'")


def gradient(s: ScalarField, convention: StencilConvention = CENTRAL) -> VectorField:
    h = s.grid.spacing
    parts = [_derivative(s.values, axis, h, convention.gradient_scheme) for axis in range(s.grid.dim)]
    return VectorField(s.grid, np.stack(parts))


def divergence(v: VectorField, convention: StencilConvention = CENTRAL) -> ScalarField:
    h = v.grid.spacing
    total = sum(
        _derivative(v.values[axis], axis, h, convention.divergence_scheme) for axis in range(v.grid.dim)
    )
    return ScalarField(v.grid, total)


def derivative_matrix(v: VectorField) -> np.ndarray:
    """Central quotients D[i, j] = d v_i / d x_j, shape (dim, dim, *grid)."""
    h = v.grid.spacing
    dim = v.grid.dim
    return np.stack(
        [np.stack([_central(v.values[i], j, h) for j in range(dim)]) for i in range(dim)]
    )


def curl_from_matrix(d: np.ndarray) -> np.ndarray:
    """Curl components from a derivative matrix.

    3D returns (u3_x2 - u2_x3, u1_x3 - u3_x1, u2_x1 - u1_x2); 2D returns the
    scalar u2_x1 - u1_x2 with a leading axis of length one.
    """
    if d.shape[0] == 2:
        return (d[1, 0] - d[0, 1])[np.newaxis]
    return np.stack(
        [
            d[2, 1] - d[1, 2],
            d[0, 2] - d[2, 0],
            d[1, 0] - d[0, 1],
        ]
    )


def curl(v: VectorField) -> Union[VectorField, ScalarField]:
    values = curl_from_matrix(derivative_matrix(v))
    if v.grid.dim == 2:
        return ScalarField(v.grid, values[0])
    return VectorField(v.grid, values)


def _laplacian_array(values: np.ndarray, h: float) -> np.ndarray:
    out = values.copy()
    dim = values.ndim
    inner = (slice(1, -1),) * dim
    acc = -2.0 * dim * values[inner]
    for axis in range(dim):
        plus = list(inner)
        minus = list(inner)
        plus[axis] = slice(2, None)
        minus[axis] = slice(None, -2)
        acc = acc + values[tuple(plus)] + values[tuple(minus)]
    out[inner] = acc / (h * h)
    return out


def laplacian(field: Union[ScalarField, VectorField]) -> Union[ScalarField, VectorField]:
    """Standard (2*dim+1)-point Laplacian on interior nodes.

    Boundary rows are Dirichlet identity rows: the output equals the input
    there, which is zero for every field the solvers and norms work with.
    """
    h = field.grid.spacing
    if isinstance(field, ScalarField):
        return ScalarField(field.grid, _laplacian_array(field.values, h))
    return VectorField(field.grid, np.stack([_laplacian_array(part, h) for part in field.values]))


def _determinant(m: np.ndarray) -> np.ndarray:
    return np.linalg.det(np.moveaxis(m, (0, 1), (-2, -1)))


def jacobian_det(phi: Transformation) -> ScalarField:
    return ScalarField(phi.grid, _determinant(derivative_matrix(phi.positions)))


def _tail_from_matrix(d: np.ndarray) -> np.ndarray:
    if d.shape[0] == 2:
        return d[0, 0] * d[1, 1] - d[0, 1] * d[1, 0]
    return (
        d[0, 0] * d[1, 1]
        + d[0, 0] * d[2, 2]
        + d[1, 1] * d[2, 2]
        - d[0, 1] * d[1, 0]
        - d[0, 2] * d[2, 0]
        - d[1, 2] * d[2, 1]
    )


def _cubic_from_matrix(d: np.ndarray) -> np.ndarray:
    return (
        d[0, 0] * (d[1, 1] * d[2, 2] - d[1, 2] * d[2, 1])
        - d[0, 1] * (d[1, 0] * d[2, 2] - d[1, 2] * d[2, 0])
        + d[0, 2] * (d[1, 0] * d[2, 1] - d[1, 1] * d[2, 0])
    )


def expansion_f_from_matrix(d: np.ndarray) -> np.ndarray:
    if d.shape[0] == 2:
        # 2x2 algebra: J(id+u) = 1 + div(u) + det(grad u), so F = -det(grad u).
        return -_tail_from_matrix(d)
    return -(_cubic_from_matrix(d) + _tail_from_matrix(d))


def expansion_tail(u: VectorField) -> ScalarField:
    return ScalarField(u.grid, _tail_from_matrix(derivative_matrix(u)))


def expansion_F(u: VectorField) -> ScalarField:
    return ScalarField(u.grid, expansion_f_from_matrix(derivative_matrix(u)))


def identity_mismatch(u: VectorField) -> float:
    """Max-norm of J(id+u) - (1 + div u - F(u)) on shared central quotients.

    The boundary of ``u`` is not required to vanish here.
    """
    positions = VectorField(u.grid, lattice_positions(u.grid) + u.values)
    determinant = _determinant(derivative_matrix(positions))
    expanded = 1.0 + divergence(u).values - expansion_F(u).values
    return float(np.max(np.abs(determinant - expanded)))
