"""
Grid-refinement sweep of the reconstruction and curl-effect experiments.

For every requested resolution, reconstructs the smooth example target from its
Jacobian alone and from Jacobian plus curl, then runs the curl-effect pair on
the same grid. One CSV row per resolution.
"""

import argparse
import csv
from pathlib import Path

from contracts.dto import OptimizerConfig
from mesh_engine.experiments import compare_reconstructions, curl_effect, example_target
from mesh_engine.fields import GridSpec


DEFAULT_OUTPUT = Path("runs/sweep/reconstruction_sweep.csv")
COLUMNS = [
    "points_per_axis",
    "error_without_curl",
    "error_with_curl",
    "relative_error_with_curl",
    "status_with_curl",
    "curl_effect_distance",
    "curl_effect_jac_residual",
]


def sweep_row(points: int, dim: int, amplitude: float, config: OptimizerConfig) -> list:
    grid = GridSpec(dim=dim, points_per_axis=points)
    comparison = compare_reconstructions(example_target(grid, amplitude), config)
    effect = curl_effect(grid, compression=amplitude / 10, swirl=amplitude / 10, config=config)
    worst_residual = max(effect.trace_without_swirl.final.jac_residual, effect.trace_with_swirl.final.jac_residual)
    return [
        points,
        repr(comparison.error_without_curl),
        repr(comparison.error_with_curl),
        repr(comparison.relative_error_with_curl),
        comparison.trace_with_curl.status,
        repr(effect.distance),
        repr(worst_residual),
    ]


def main() -> None:
    parser = argparse.ArgumentParser(description="Sweep reconstruction accuracy over grid resolutions")
    parser.add_argument("--points", type=int, nargs="+", default=[17, 33, 65], help="Points per axis to try")
    parser.add_argument("--dim", type=int, choices=(2, 3), default=2)
    parser.add_argument("--amplitude", type=float, default=0.05, help="Displacement amplitude of the example target")
    parser.add_argument("--max-outer", type=int, default=300)
    parser.add_argument("--out", type=Path, default=DEFAULT_OUTPUT, help="CSV file to write")
    args = parser.parse_args()

    config = OptimizerConfig(max_outer=args.max_outer)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(COLUMNS)
        for points in args.points:
            row = sweep_row(points, args.dim, args.amplitude, config)
            writer.writerow(row)
            print(f"N={points}: T1 error {row[1]}, T2 error {row[2]} ({row[4]}), curl effect {row[5]}")

    print(f"Done. Wrote {len(args.points)} rows to {args.out}")


if __name__ == "__main__":
    main()
