import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from contracts.dto import MonitorManifest, SolverConfig
from .diffops import STAGGERED, curl, divergence, gradient, jacobian_det
from .errors import DimensionMismatchError, FoldedTargetError, MonitorFormatError, NonFiniteFieldError, NonPositiveMonitorError
from .fields import (
    GridSpec,
    ScalarField,
    Transformation,
    VectorField,
    integrate,
    interior_l2_norm,
    read_field,
    write_field,
)
from .poisson import solve_dirichlet


logger = logging.getLogger(__name__)

DEFAULT_BETA = 2.0
MANIFEST_NAME = "monitor.json"
INTEGRAL_TOL = 1e-10
DIVERGENCE_TOL = 1e-8

CurlTarget = Union[ScalarField, VectorField]


def zero_curl(grid: GridSpec) -> CurlTarget:
    if grid.dim == 2:
        return ScalarField.zeros(grid)
    return VectorField.zeros(grid)


def divergence_defect(g: CurlTarget) -> float:
    """Interior L2 norm of the central divergence of a 3D curl target; 0 in 2D."""
    if isinstance(g, ScalarField):
        return 0.0
    return interior_l2_norm(divergence(g))


@dataclass(frozen=True, eq=False)
class MonitorPair:
    f0: ScalarField
    g0: CurlTarget
    curl_enabled: bool = False
    normalization_defect: float = 0.0

    def __post_init__(self) -> None:
        grid = self.f0.grid
        if self.g0.grid != grid:
            raise DimensionMismatchError("f0 and g0 must share one grid")
        if grid.dim == 2 and not isinstance(self.g0, ScalarField):
            raise DimensionMismatchError("2D monitors carry a scalar curl target")
        if grid.dim == 3 and not isinstance(self.g0, VectorField):
            raise DimensionMismatchError("3D monitors carry a vector curl target")
        if not np.all(np.isfinite(self.f0.values)) or not np.all(np.isfinite(self.g0.values)):
            raise NonFiniteFieldError()
        if np.min(self.f0.values) <= 0.0:
            raise NonPositiveMonitorError()
        integral = integrate(self.f0)
        if abs(integral - 1.0) > INTEGRAL_TOL:
            raise ValueError(f"f0 must integrate to 1, got {integral:.15g}")
        defect = divergence_defect(self.g0)
        if defect > DIVERGENCE_TOL * max(1.0, interior_l2_norm(self.g0)):
            raise ValueError(f"g0 must be divergence-free, divergence norm {defect:.3e}")

    @property
    def grid(self) -> GridSpec:
        return self.f0.grid


def normalize_f0(raw: ScalarField) -> ScalarField:
    values = raw.values
    if not np.all(np.isfinite(values)):
        raise NonFiniteFieldError()
    if np.min(values) <= 0.0:
        raise NonPositiveMonitorError()
    return raw.with_values(values / integrate(raw))


def project_divergence_free(g: VectorField, config: Optional[SolverConfig] = None) -> VectorField:
    """Remove the gradient part of a 3D field: g - grad_+(p) with laplacian(p) = div_-(g).

    The staggered pair composes to the interior Laplacian exactly, so the
    backward divergence of the result vanishes on interior nodes up to the
    solver tolerance.
    """
    if g.grid.dim != 3:
        raise DimensionMismatchError("divergence-free projection applies to 3D fields")
    potential = solve_dirichlet(divergence(g, STAGGERED), config)
    return g.with_values(g.values - gradient(potential, STAGGERED).values)


def load_grayscale(path: Union[str, Path]) -> Image.Image:
    try:
        image = Image.open(path)
        image.load()
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise MonitorFormatError(f"Object is not a readable grayscale image: {path}") from exc
    return image


def intensity_on_grid(image: Image.Image, grid: GridSpec) -> np.ndarray:
    """Bilinearly resample intensity to the lattice, scaled to [0, 255].

    Columns run along x1 and rows run along x2 from the bottom of the image; the
    aspect ratio is stretched to the unit square. 3D grids repeat the image
    along x3.
    """
    width, height = image.size
    if width <= 0 or height <= 0:
        raise MonitorFormatError("Image has invalid dimensions")

    if image.mode in {"L", "P"}:
        max_value = 255.0
        gray = image.convert("L")
    elif image.mode.startswith("I"):
        max_value = 65535.0
        gray = image.convert("I") if image.mode != "I" else image
    else:
        raise MonitorFormatError(f"Unsupported image mode '{image.mode}', expected grayscale")

    points = grid.points_per_axis
    resized = gray.convert("F").resize((points, points), Image.Resampling.BILINEAR)
    rows = np.asarray(resized, dtype=np.float64) * (255.0 / max_value)
    plane = np.clip(rows[::-1, :].T, 0.0, 255.0)
    if grid.dim == 2:
        return plane
    return np.repeat(plane[:, :, np.newaxis], points, axis=2)


def monitor_from_image(
    image: Union[Image.Image, str, Path],
    grid: GridSpec,
    *,
    beta: float = DEFAULT_BETA,
    curl_enabled: bool = False,
) -> MonitorPair:
    """Dark pixels ask for small cells: raw = 1 + beta * (1 - I / 255)."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if not isinstance(image, Image.Image):
        image = load_grayscale(image)

    intensity = intensity_on_grid(image, grid)
    raw = ScalarField(grid, 1.0 + beta * (1.0 - intensity / 255.0))
    pair = MonitorPair(f0=normalize_f0(raw), g0=zero_curl(grid), curl_enabled=curl_enabled)
    logger.info(
        "Built monitor from image",
        extra={
            "event": "engine.monitor.from_image",
            "points_per_axis": grid.points_per_axis,
            "dim": grid.dim,
            "beta": beta,
            "f0_min": float(np.min(pair.f0.values)),
            "f0_max": float(np.max(pair.f0.values)),
        },
    )
    return pair


def monitor_from_transformation(t: Transformation, use_curl: bool) -> MonitorPair:
    det = jacobian_det(t)
    min_det = float(np.min(det.values))
    if min_det <= 0.0:
        raise FoldedTargetError(min_det)
    g0 = curl(t.positions) if use_curl else zero_curl(t.grid)
    return MonitorPair(
        f0=normalize_f0(det),
        g0=g0,
        curl_enabled=use_curl,
        normalization_defect=integrate(det) - 1.0,
    )


def save_monitor(pair: MonitorPair, directory: Union[str, Path], *, source: str | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_field(pair.f0, directory / "f0.fld")
    write_field(pair.g0, directory / "g0.fld")
    manifest = MonitorManifest(
        dim=pair.grid.dim,
        points_per_axis=pair.grid.points_per_axis,
        f0_file="f0.fld",
        g0_file="g0.fld",
        curl_enabled=pair.curl_enabled,
        source=source,
    )
    path = directory / MANIFEST_NAME
    path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    return path


def load_monitor(manifest_path: Union[str, Path]) -> MonitorPair:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    manifest = MonitorManifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))
    f0 = read_field(manifest_path.parent / manifest.f0_file, expected_dim=manifest.dim)
    g0 = read_field(manifest_path.parent / manifest.g0_file, expected_dim=manifest.dim)
    if not isinstance(f0, ScalarField):
        raise DimensionMismatchError("f0 file must hold a scalar field")
    if f0.grid.points_per_axis != manifest.points_per_axis:
        raise DimensionMismatchError("f0 grid does not match the manifest")
    return MonitorPair(f0=f0, g0=g0, curl_enabled=manifest.curl_enabled)
