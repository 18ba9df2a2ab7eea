"""Batch command line: monitors, mesh generation, reconstruction and the uniqueness lab."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from contracts.dto import OptimizerConfig, RunManifest
from mesh_engine.config import default_optimizer_config
from mesh_engine.diffops import jacobian_det
from mesh_engine.errors import BoundaryError, FoldedTargetError, MeshEngineError, SolverError
from mesh_engine.experiments import random_zero_boundary, smooth_seed
from mesh_engine.export import (
    write_bounds_csv,
    write_chain_csv,
    write_field_vtk,
    write_fixed_point_csv,
    write_trace_csv,
    write_vtk,
)
from mesh_engine.fields import (
    GridSpec,
    Transformation,
    VectorField,
    identity_transformation,
    read_field,
    read_transformation,
    write_field,
)
from mesh_engine.monitor import DEFAULT_BETA, MANIFEST_NAME, load_monitor, monitor_from_image, save_monitor
from mesh_engine.optimizer import minimize, reconstruct
from mesh_engine.poisson import poincare_constant
from mesh_engine.uniqueness import bound_sequence, chain_report, fixed_point_iteration
from .config import configure_logging, get_settings


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_TARGET = 4

RUN_MANIFEST_NAME = "run.json"


class OutputExistsError(Exception):
    pass


def _output_dir(args: argparse.Namespace) -> Path:
    if args.out is not None:
        return Path(args.out)
    return get_settings().output_root / args.command


def _prepare_outputs(args: argparse.Namespace, names: Sequence[str], inputs: Sequence[str], overrides: dict) -> Path:
    """Refuse to clobber earlier results, then record the run before computing."""
    out_dir = _output_dir(args)
    existing = [name for name in (RUN_MANIFEST_NAME, *names) if (out_dir / name).exists()]
    if existing and not args.force:
        raise OutputExistsError(f"{out_dir} already holds {', '.join(existing)}; pass --force to overwrite")
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest = RunManifest(
        subcommand=args.command,
        inputs=[str(item) for item in inputs],
        points_per_axis=getattr(args, "n", None),
        dim=getattr(args, "dim", None),
        overrides={key: value for key, value in overrides.items() if value is not None},
        output_dir=str(out_dir),
        seed=getattr(args, "seed", 0),
    )
    (out_dir / RUN_MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    return out_dir


def _optimizer_config(args: argparse.Namespace) -> OptimizerConfig:
    overrides = {
        "step_sigma": args.sigma,
        "max_outer": args.max_outer,
        "ssd_rel_tol": args.tol,
    }
    base = default_optimizer_config().model_dump()
    base.update({key: value for key, value in overrides.items() if value is not None})
    return OptimizerConfig.model_validate(base)


def _optimizer_overrides(args: argparse.Namespace) -> dict:
    return {"sigma": args.sigma, "max_outer": args.max_outer, "tol": args.tol, "use_curl": getattr(args, "use_curl", None)}


def _summary(event: str, payload: dict) -> None:
    logger.info(f"{event} {json.dumps(payload)}")


def cmd_image2monitor(args: argparse.Namespace) -> int:
    grid = GridSpec(dim=args.dim, points_per_axis=args.n)
    if not Path(args.image).exists():
        raise FileNotFoundError(f"image not found: {args.image}")
    out_dir = _prepare_outputs(
        args,
        [MANIFEST_NAME, "f0.fld", "g0.fld"],
        [args.image],
        {"beta": args.beta, "use_curl": args.use_curl},
    )
    pair = monitor_from_image(args.image, grid, beta=args.beta, curl_enabled=args.use_curl)
    save_monitor(pair, out_dir, source=str(args.image))
    f0 = pair.f0.values
    print(f"monitor written to {out_dir / MANIFEST_NAME}: f0 in [{f0.min():.6g}, {f0.max():.6g}]")
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    monitor = load_monitor(args.monitor)
    if args.n is not None and args.n != monitor.grid.points_per_axis:
        raise ValueError(f"--n {args.n} does not match the monitor grid of {monitor.grid.points_per_axis} points")
    config = _optimizer_config(args)
    out_dir = _prepare_outputs(args, ["mesh.fld", "mesh.vtk", "trace.csv"], [args.monitor], _optimizer_overrides(args))

    phi, trace = minimize(identity_transformation(monitor.grid), monitor, config)
    write_trace_csv(trace, out_dir / "trace.csv")
    if trace.status == "solver_failed":
        print(f"solver failed after {trace.accepted_iterations} iterations: {trace.message}", file=sys.stderr)
        return EXIT_SOLVER

    write_field(phi.positions, out_dir / "mesh.fld")
    write_vtk(phi, out_dir / "mesh.vtk", scalars={"jacobian": jacobian_det(phi)})
    final = trace.final
    _summary(
        "cli.generate.summary",
        {"status": trace.status, "iterations": trace.accepted_iterations, "ssd": final.ssd, "min_jacobian": final.min_jacobian},
    )
    folded = " FOLDED" if trace.folded else ""
    print(f"status={trace.status} iterations={trace.accepted_iterations} ssd={final.ssd:.6e} min_jacobian={final.min_jacobian:.6g}{folded}")
    return EXIT_OK


def cmd_reconstruct(args: argparse.Namespace) -> int:
    target = read_transformation(args.target)
    config = _optimizer_config(args)
    out_dir = _prepare_outputs(
        args,
        ["reconstruction.fld", "reconstruction.vtk", "trace.csv"],
        [args.target],
        _optimizer_overrides(args),
    )

    phi, trace = reconstruct(target, args.use_curl, config)
    write_trace_csv(trace, out_dir / "trace.csv", reference_column="t0_error")
    if trace.status == "solver_failed":
        print(f"solver failed after {trace.accepted_iterations} iterations: {trace.message}", file=sys.stderr)
        return EXIT_SOLVER

    write_field(phi.positions, out_dir / "reconstruction.fld")
    write_vtk(phi, out_dir / "reconstruction.vtk", scalars={"jacobian": jacobian_det(phi)})
    final = trace.final
    _summary(
        "cli.reconstruct.summary",
        {"use_curl": args.use_curl, "status": trace.status, "t0_error": final.reference_error, "ssd": final.ssd},
    )
    print(f"status={trace.status} use_curl={int(args.use_curl)} t0_error={final.reference_error:.6e} ssd={final.ssd:.6e}")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    grid = GridSpec(dim=args.dim, points_per_axis=args.n)
    out_dir = _prepare_outputs(args, ["chain.csv"], [], {"trials": args.trials})
    rng = np.random.default_rng(args.seed)
    c = poincare_constant(grid)
    reports = [chain_report(random_zero_boundary(grid, rng), c) for _ in range(args.trials)]
    write_chain_csv(reports, out_dir / "chain.csv")
    failed = sum(1 for report in reports if not report.all_pass)
    _summary("cli.check.summary", {"trials": args.trials, "failed": failed, "c": c})
    print(f"trials={args.trials} failed={failed} C={c:.6e}")
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace) -> int:
    if args.c is None and args.grid is None:
        raise ValueError("pass either --c or --grid")
    c = args.c if args.c is not None else poincare_constant(GridSpec(dim=args.dim, points_per_axis=args.grid))
    out_dir = _prepare_outputs(args, ["bounds.csv"], [], {"epsilon": args.epsilon, "c": c, "k_max": args.k_max})
    sequence = bound_sequence(args.epsilon, c, args.k_max)
    write_bounds_csv(sequence, out_dir / "bounds.csv")
    print(f"epsilon={args.epsilon} C={c:.6e} convergent={int(sequence.convergent)}")
    return EXIT_OK


def cmd_fixed_point(args: argparse.Namespace) -> int:
    grid = GridSpec(dim=args.dim, points_per_axis=args.n)
    config = default_optimizer_config().solver
    out_dir = _prepare_outputs(args, ["fixed_point.csv"], [], {"amplitude": args.amplitude, "m_max": args.m_max})
    seed = smooth_seed(grid, args.amplitude, np.random.default_rng(args.seed))
    trajectory = fixed_point_iteration(seed, args.m_max, config)
    write_fixed_point_csv(trajectory, out_dir / "fixed_point.csv")
    final = trajectory.steps[-1].norms
    _summary("cli.fixed_point.summary", {"steps": len(trajectory.steps), "diverged": trajectory.diverged, "u_l2": final.u_l2})
    flag = " DIVERGED" if trajectory.diverged else ""
    print(f"steps={len(trajectory.steps)} final_u_l2={final.u_l2:.6e}{flag}")
    return EXIT_OK


def cmd_export_vtk(args: argparse.Namespace) -> int:
    source = Path(args.field)
    field = read_field(source)
    if isinstance(field, VectorField):
        try:
            field = Transformation(field.grid, field)
        except BoundaryError:
            pass
    name = f"{source.stem}.vtk"
    out_dir = _prepare_outputs(args, [name], [args.field], {})
    path = write_field_vtk(field, out_dir / name)
    print(f"wrote {path}")
    return EXIT_OK


def _add_output_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, default=None, help="Output directory (default: $MESH_OUTPUT_ROOT/<command>)")
    parser.add_argument("--force", action="store_true", help="Overwrite existing outputs")


def _add_optimizer_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sigma", type=float, default=None, help="Initial control scale")
    parser.add_argument("--max-outer", type=int, default=None, help="Maximum accepted iterations")
    parser.add_argument("--tol", type=float, default=None, help="Relative SSD decrease that stops the descent")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="divcurl-mesh", description="Div-curl grid generation and uniqueness checks")
    parser.add_argument("--log-level", default=None, help="Overrides MESH_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)

    image = subparsers.add_parser("image2monitor", help="Build a monitor pair from a grayscale image")
    image.add_argument("image")
    image.add_argument("--n", type=int, default=65)
    image.add_argument("--dim", type=int, choices=(2, 3), default=2)
    image.add_argument("--beta", type=float, default=DEFAULT_BETA)
    image.add_argument("--use-curl", action="store_true")
    _add_output_flags(image)
    image.set_defaults(handler=cmd_image2monitor)

    generate = subparsers.add_parser("generate", help="Minimize the SSD functional for a monitor")
    generate.add_argument("monitor", help="monitor.json or the directory holding it")
    generate.add_argument("--n", type=int, default=None)
    _add_optimizer_flags(generate)
    _add_output_flags(generate)
    generate.set_defaults(handler=cmd_generate)

    rebuild = subparsers.add_parser("reconstruct", help="Recover a transformation from its Jacobian (and curl)")
    rebuild.add_argument("target", help="FLD1 transformation file")
    rebuild.add_argument("--use-curl", action="store_true")
    _add_optimizer_flags(rebuild)
    _add_output_flags(rebuild)
    rebuild.set_defaults(handler=cmd_reconstruct)

    check = subparsers.add_parser("check", help="Evaluate the inequality chain on random zero-boundary fields")
    check.add_argument("--n", type=int, default=33)
    check.add_argument("--dim", type=int, choices=(2, 3), default=2)
    check.add_argument("--trials", type=int, default=100)
    check.add_argument("--seed", type=int, default=0)
    _add_output_flags(check)
    check.set_defaults(handler=cmd_check)

    bounds = subparsers.add_parser("bounds", help="Tabulate the analytic bound sequence")
    bounds.add_argument("--epsilon", type=float, required=True)
    bounds.add_argument("--c", type=float, default=None, help="Poincare constant")
    bounds.add_argument("--grid", type=int, default=None, help="Resolve C from a lattice with this many points per axis")
    bounds.add_argument("--dim", type=int, choices=(2, 3), default=2)
    bounds.add_argument("--k-max", type=int, default=10)
    _add_output_flags(bounds)
    bounds.set_defaults(handler=cmd_bounds)

    fixed = subparsers.add_parser("fixed-point", help="Run the contraction u -> solve(laplacian u = grad F(u))")
    fixed.add_argument("--n", type=int, default=17)
    fixed.add_argument("--dim", type=int, choices=(2, 3), default=3)
    fixed.add_argument("--amplitude", type=float, default=0.1, help="Largest of the seed's three norms")
    fixed.add_argument("--m-max", type=int, default=40)
    fixed.add_argument("--seed", type=int, default=0)
    _add_output_flags(fixed)
    fixed.set_defaults(handler=cmd_fixed_point)

    export = subparsers.add_parser("export-vtk", help="Convert an FLD1 file to legacy VTK")
    export.add_argument("field")
    _add_output_flags(export)
    export.set_defaults(handler=cmd_export_vtk)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level or get_settings().log_level)
    handler: Callable[[argparse.Namespace], int] = args.handler

    try:
        code = handler(args)
    except FoldedTargetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TARGET
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OutputExistsError, FileNotFoundError, ValueError, MeshEngineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        logger.exception("Unhandled error in subcommand", extra={"event": "cli.error.unhandled", "command": args.command})
        raise

    logger.info("Subcommand finished", extra={"event": f"cli.{args.command.replace('-', '_')}.completed", "exit_code": code})
    return code


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
