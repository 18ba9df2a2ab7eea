import csv
import tempfile
import unittest
from pathlib import Path

from contracts.dto import FixedPointStep, FixedPointTrajectory, NormTriple, OptimizerTrace, TraceRecord
from mesh_engine.diffops import jacobian_det
from mesh_engine.experiments import example_target
from mesh_engine.export import (
    BOUND_COLUMNS,
    CHAIN_COLUMNS,
    TRACE_COLUMNS,
    write_bounds_csv,
    write_chain_csv,
    write_field_vtk,
    write_fixed_point_csv,
    write_trace_csv,
    write_vtk,
)
from mesh_engine.fields import GridSpec, ScalarField, identity_transformation
from mesh_engine.uniqueness import bound_sequence


def _read_rows(path: Path) -> list[list[str]]:
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


def _trace() -> OptimizerTrace:
    records = [
        TraceRecord(iteration=0, ssd=1.0, jac_residual=0.5, curl_residual=0.0, min_jacobian=1.0, sigma=0.0, reference_error=0.2),
        TraceRecord(iteration=1, ssd=0.25, jac_residual=0.1, curl_residual=0.0, min_jacobian=0.9, sigma=0.1, reference_error=0.05),
    ]
    return OptimizerTrace(records=records, status="max_outer")


class VtkTest(unittest.TestCase):
    def test_planar_mesh_layout(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=5)
        target = example_target(grid, 0.05)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_vtk(target, Path(tmp) / "mesh.vtk", scalars={"jacobian": jacobian_det(target)})
            lines = path.read_text(encoding="ascii").splitlines()

        self.assertEqual(lines[0], "# vtk DataFile Version 3.0")
        self.assertEqual(lines[3], "DATASET STRUCTURED_GRID")
        self.assertEqual(lines[4], "DIMENSIONS 5 5 1")
        self.assertEqual(lines[5], "POINTS 25 double")
        points = [line.split() for line in lines[6:31]]
        self.assertTrue(all(len(point) == 3 and float(point[2]) == 0.0 for point in points))
        self.assertEqual(points[1][:2], ["0.25", "0.0"])
        self.assertEqual(lines[31], "POINT_DATA 25")
        self.assertEqual(lines[32], "SCALARS jacobian double 1")
        self.assertEqual(len(lines), 34 + 25)

    def test_volume_mesh_point_count(self) -> None:
        grid = GridSpec(dim=3, points_per_axis=4)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_vtk(identity_transformation(grid), Path(tmp) / "cube.vtk")
            lines = path.read_text(encoding="ascii").splitlines()

        self.assertEqual(lines[4], "DIMENSIONS 4 4 4")
        self.assertEqual(lines[5], "POINTS 64 double")
        self.assertEqual(len(lines), 6 + 64)

    def test_scalar_field_goes_on_the_lattice(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=3)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_field_vtk(ScalarField.constant(grid, 2.0), Path(tmp) / "f0.vtk")
            text = path.read_text(encoding="ascii")

        self.assertIn("SCALARS value double 1", text)

    def test_scalar_on_foreign_grid_is_rejected(self) -> None:
        grid = GridSpec(dim=2, points_per_axis=3)
        other = GridSpec(dim=2, points_per_axis=5)
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ValueError):
                write_vtk(identity_transformation(grid), Path(tmp) / "bad.vtk", scalars={"s": ScalarField.zeros(other)})


class CsvTest(unittest.TestCase):
    def test_trace_with_reference_column(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            rows = _read_rows(write_trace_csv(_trace(), Path(tmp) / "trace.csv", reference_column="t0_error"))

        self.assertEqual(rows[0], TRACE_COLUMNS + ["t0_error"])
        self.assertEqual(len(rows), 3)
        self.assertEqual(float(rows[2][1]), 0.25)
        self.assertEqual(float(rows[2][-1]), 0.05)

    def test_trace_without_reference_column(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            rows = _read_rows(write_trace_csv(_trace(), Path(tmp) / "trace.csv"))

        self.assertEqual(rows[0], TRACE_COLUMNS)

    def test_bounds_carry_convergent_flag(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            good = _read_rows(write_bounds_csv(bound_sequence(0.5, 0.05, 4), Path(tmp) / "good.csv"))
            bad = _read_rows(write_bounds_csv(bound_sequence(2.0, 0.05, 4), Path(tmp) / "bad.csv"))

        self.assertEqual(good[0], BOUND_COLUMNS)
        self.assertEqual(len(good), 6)
        self.assertEqual({row[-1] for row in good[1:]}, {"1"})
        self.assertEqual({row[-1] for row in bad[1:]}, {"0"})

    def test_empty_chain_is_header_only(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            rows = _read_rows(write_chain_csv([], Path(tmp) / "chain.csv"))

        self.assertEqual(rows, [CHAIN_COLUMNS])

    def test_fixed_point_marks_divergent_step(self) -> None:
        steps = [
            FixedPointStep(
                m=m,
                norms=NormTriple(u_l2=value, grad_l2=value, lap_l2=value),
                grad_f_l2=value,
                eps_squared_bounds_grad_f=False,
                product_bound=10 * value,
            )
            for m, value in enumerate([1.0, 40.0])
        ]
        with tempfile.TemporaryDirectory() as tmp:
            rows = _read_rows(write_fixed_point_csv(FixedPointTrajectory(steps=steps, diverged=True), Path(tmp) / "fp.csv"))

        self.assertEqual([row[-1] for row in rows[1:]], ["0", "1"])


if __name__ == "__main__":
    unittest.main()
