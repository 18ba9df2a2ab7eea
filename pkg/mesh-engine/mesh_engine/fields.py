"""Lattices, fields and the FLD1 field file format.

Every field lives on the uniform cubic lattice of [0, 1]^dim described by a
`GridSpec`. Arrays are stored as float64 with shape ``(N,) * dim`` and
``indexing="ij"``, so array axis ``k`` is the coordinate ``x_{k+1}``.
Vector fields carry a leading component axis.
"""

import logging
import os
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import BinaryIO, Callable, Union

import numpy as np

from .errors import (
    BadMagicError,
    BoundaryError,
    DimensionMismatchError,
    FieldFormatError,
    GridMismatchError,
    NonFiniteFieldError,
    TruncatedPayloadError,
)


logger = logging.getLogger(__name__)

FIELD_MAGIC = b"FLD1"
_HEADER = struct.Struct("<4sBBHI")
_PAYLOAD_DTYPE = np.dtype("<f8")

PathOrStream = Union[str, os.PathLike, BinaryIO]


@dataclass(frozen=True)
class GridSpec:
    dim: int
    points_per_axis: int

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ValueError(f"grid dimension must be 2 or 3, got {self.dim}")
        if self.points_per_axis < 3:
            raise ValueError(f"points_per_axis must be at least 3, got {self.points_per_axis}")

    @property
    def spacing(self) -> float:
        return 1.0 / (self.points_per_axis - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def interior(self) -> tuple[slice, ...]:
        return (slice(1, -1),) * self.dim

    def axis_coordinates(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.points_per_axis)

    def mesh(self) -> tuple[np.ndarray, ...]:
        axis = self.axis_coordinates()
        return tuple(np.meshgrid(*([axis] * self.dim), indexing="ij"))

    def boundary_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        mask[self.interior] = False
        return mask

    def quadrature_weights(self) -> np.ndarray:
        """Cell-volume node weights; they integrate constants exactly over the unit cube."""
        axis = np.full(self.points_per_axis, self.spacing)
        axis[0] = axis[-1] = 0.5 * self.spacing
        weights = axis
        for _ in range(self.dim - 1):
            weights = np.multiply.outer(weights, axis)
        return weights


def _frozen_array(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        array = np.asarray(self.values, dtype=np.float64)
        if array.ndim == 1 and array.size == self.grid.points_per_axis**self.grid.dim:
            array = array.reshape(self.grid.shape)
        if array.shape != self.grid.shape:
            raise GridMismatchError(f"scalar values of shape {array.shape} do not fit grid {self.grid.shape}")
        object.__setattr__(self, "values", _frozen_array(array))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, func: Callable[..., np.ndarray]) -> "ScalarField":
        return cls(grid, np.broadcast_to(func(*grid.mesh()), grid.shape))

    @property
    def component_count(self) -> int:
        return 1

    def stacked(self) -> np.ndarray:
        return self.values[np.newaxis]

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        array = np.asarray(self.values, dtype=np.float64)
        expected = (self.grid.dim, *self.grid.shape)
        if array.ndim == 2 and array.shape == (self.grid.dim, self.grid.points_per_axis**self.grid.dim):
            array = array.reshape(expected)
        if array.shape != expected:
            raise GridMismatchError(f"vector values of shape {array.shape} do not fit {expected}")
        object.__setattr__(self, "values", _frozen_array(array))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VectorField":
        return cls(grid, np.zeros((grid.dim, *grid.shape)))

    @classmethod
    def from_components(cls, components: list[ScalarField] | tuple[ScalarField, ...]) -> "VectorField":
        grids = {component.grid for component in components}
        if len(grids) != 1:
            raise GridMismatchError("all components must share one grid")
        grid = grids.pop()
        return cls(grid, np.stack([component.values for component in components]))

    @classmethod
    def from_function(cls, grid: GridSpec, func: Callable[..., tuple[np.ndarray, ...]]) -> "VectorField":
        parts = func(*grid.mesh())
        return cls(grid, np.stack([np.broadcast_to(part, grid.shape) for part in parts]))

    @property
    def component_count(self) -> int:
        return self.grid.dim

    @property
    def components(self) -> tuple[ScalarField, ...]:
        return tuple(ScalarField(self.grid, part) for part in self.values)

    def stacked(self) -> np.ndarray:
        return self.values

    def with_values(self, values: np.ndarray) -> "VectorField":
        return VectorField(self.grid, values)


Field = Union[ScalarField, VectorField]


def lattice_positions(grid: GridSpec) -> np.ndarray:
    return np.stack(grid.mesh())


@dataclass(frozen=True, eq=False)
class Transformation:
    """Map of the unit cube onto itself, stored as absolute node positions."""

    grid: GridSpec
    positions: VectorField

    def __post_init__(self) -> None:
        if self.positions.grid != self.grid:
            raise GridMismatchError("positions must live on the transformation grid")
        mask = self.grid.boundary_mask()
        identity = lattice_positions(self.grid)
        if not np.array_equal(self.positions.values[:, mask], identity[:, mask]):
            raise BoundaryError("transformation must equal the identity on the boundary")

    @classmethod
    def from_displacement(cls, displacement: VectorField) -> "Transformation":
        grid = displacement.grid
        positions = lattice_positions(grid) + displacement.values
        return cls(grid, VectorField(grid, positions))

    @cached_property
    def displacement(self) -> VectorField:
        return VectorField(self.grid, self.positions.values - lattice_positions(self.grid))

    def moved_by(self, displacement: VectorField) -> "Transformation":
        """phi = phi_old + u."""
        _require_same_grid(self.grid, displacement.grid)
        return Transformation(self.grid, VectorField(self.grid, self.positions.values + displacement.values))


def identity_transformation(grid: GridSpec) -> Transformation:
    return Transformation(grid, VectorField(grid, lattice_positions(grid)))


def _require_same_grid(first: GridSpec, second: GridSpec) -> None:
    if first != second:
        raise GridMismatchError(f"grid mismatch: {first} vs {second}")


def require_finite(field: Field) -> None:
    if not np.all(np.isfinite(field.values)):
        raise NonFiniteFieldError()


def l2_norm(field: Field) -> float:
    """Node-weighted discrete L2 norm, components summed inside the root."""
    require_finite(field)
    return float(np.sqrt(field.grid.cell_volume * np.sum(np.square(field.values))))


def interior_l2_norm(field: Field) -> float:
    require_finite(field)
    inner = field.stacked()[(slice(None), *field.grid.interior)]
    return float(np.sqrt(field.grid.cell_volume * np.sum(np.square(inner))))


def max_norm(field: Field) -> float:
    return float(np.max(np.abs(field.values)))


def inner_product(first: Field, second: Field) -> float:
    _require_same_grid(first.grid, second.grid)
    return float(first.grid.cell_volume * np.sum(first.values * second.values))


def integrate(field: ScalarField) -> float:
    """Quadrature of a scalar field with cell-volume weights."""
    return float(np.sum(field.grid.quadrature_weights() * field.values))


def boundary_max(field: Field) -> float:
    mask = field.grid.boundary_mask()
    return float(np.max(np.abs(field.stacked()[:, mask])))


def write_field(field: Field, sink: PathOrStream) -> None:
    data = encode_field(field)
    if isinstance(sink, (str, os.PathLike)):
        Path(sink).write_bytes(data)
    else:
        sink.write(data)
    logger.debug(
        "Wrote field",
        extra={
            "event": "engine.fields.write",
            "dim": field.grid.dim,
            "components": field.component_count,
            "points_per_axis": field.grid.points_per_axis,
        },
    )


def read_field(source: PathOrStream, *, expected_dim: int | None = None) -> Field:
    if isinstance(source, (str, os.PathLike)):
        data = Path(source).read_bytes()
    else:
        data = source.read()
    return decode_field(data, expected_dim=expected_dim)


def decode_field(data: bytes, *, expected_dim: int | None = None) -> Field:
    if len(data) < 4 or data[:4] != FIELD_MAGIC:
        raise BadMagicError(bytes(data[:4]))
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(_HEADER.size, len(data))

    _, dim, components, reserved, points = _HEADER.unpack_from(data)
    if dim not in (2, 3):
        raise DimensionMismatchError(f"unsupported field dimension {dim}")
    if expected_dim is not None and dim != expected_dim:
        raise DimensionMismatchError(f"expected a {expected_dim}D field, file holds {dim}D")
    if components not in (1, dim):
        raise DimensionMismatchError(f"{components} components do not match a {dim}D field")
    if reserved != 0:
        raise FieldFormatError("reserved header bytes must be zero")
    if points < 3:
        raise FieldFormatError(f"points_per_axis must be at least 3, got {points}")

    grid = GridSpec(dim=dim, points_per_axis=points)
    expected = components * points**dim * _PAYLOAD_DTYPE.itemsize
    payload = data[_HEADER.size:]
    if len(payload) < expected:
        raise TruncatedPayloadError(_HEADER.size + expected, len(data))
    if len(payload) > expected:
        raise FieldFormatError(f"{len(payload) - expected} trailing bytes after payload")

    values = np.frombuffer(payload, dtype=_PAYLOAD_DTYPE).astype(np.float64)
    if components == 1:
        return ScalarField(grid, values.reshape(grid.shape))
    return VectorField(grid, values.reshape((components, *grid.shape)))


def encode_field(field: Field) -> bytes:
    header = _HEADER.pack(FIELD_MAGIC, field.grid.dim, field.component_count, 0, field.grid.points_per_axis)
    payload = np.ascontiguousarray(field.stacked(), dtype=_PAYLOAD_DTYPE).tobytes(order="C")
    return header + payload


def read_transformation(source: PathOrStream) -> Transformation:
    field = read_field(source)
    if not isinstance(field, VectorField):
        raise DimensionMismatchError("a transformation needs one component per axis")
    return Transformation(field.grid, field)
