"""Command-line front end.

Subcommands: angles, lut, project, unproject, selfcheck, bench, lift.
Global flags --calib/--out/--format/--seed may appear before or after
the subcommand.  Exit codes form a stable contract:

    0  success
    1  runtime failure (including selfcheck failures)
    2  configuration or input error
    3  I/O error when writing outputs
"""

from __future__ import annotations

import argparse
import sys

from . import experiments, formats
from .angular import patch_angles
from .errors import ConfigError, DomainError, FishropeError
from .experiments import CheckerPattern, LiftConfig, RetrievalBenchConfig
from .rope import ENCODINGS

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--calib", help="calibration file (YAML)")
    common.add_argument("--out", help="output path")
    common.add_argument(
        "--format", choices=("csv", "bin"), default="csv", help="artifact format"
    )
    common.add_argument("--seed", type=int, default=0, help="RNG seed")

    parser = argparse.ArgumentParser(
        prog="fishrope",
        description="Fisheye camera geometry, angular rotary embeddings, BEV lifting.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("angles", parents=[common], help="emit a patch angle map")
    p.add_argument("--patch-size", type=int, default=14)

    p = sub.add_parser("lut", parents=[common], help="emit an inverse lookup table")
    p.add_argument("--resolution", type=int, default=4096)

    p = sub.add_parser("project", parents=[common], help="project (theta, phi) to pixels")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--phi", type=float, required=True)

    p = sub.add_parser("unproject", parents=[common], help="invert pixels to (theta, phi)")
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--iterations", type=int, default=5)

    p = sub.add_parser("selfcheck", parents=[common], help="run every invariant check")

    p = sub.add_parser("bench", parents=[common], help="run the retrieval benchmark")
    p.add_argument("--patch-size", type=int, default=64)
    p.add_argument("--n-queries", type=int, default=512)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument(
        "--encodings",
        default=",".join(ENCODINGS),
        help="comma-separated subset of " + ",".join(ENCODINGS),
    )

    p = sub.add_parser("lift", parents=[common], help="run the BEV round-trip")
    p.add_argument("--patch-size", type=int, default=16)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--extent", type=float, nargs=2, default=(30.0, 30.0))
    p.add_argument("--resolution", type=float, default=0.5)
    p.add_argument("--checker", type=float, default=10.0, help="checker square size, m")
    p.add_argument(
        "--checker-origin",
        type=float,
        nargs=2,
        default=(2.0, -4.0),
        help="checker square corner anchor, m",
    )
    return parser


def _require_calibration(args, need_extrinsics: bool = False):
    if not args.calib:
        raise ConfigError("this subcommand requires --calib")
    camera, extrinsics = formats.load_calibration(args.calib)
    if need_extrinsics and extrinsics is None:
        raise ConfigError("calibration file lacks the extrinsics block required here")
    return camera, extrinsics


def _require_out(args) -> str:
    if not args.out:
        raise ConfigError("this subcommand requires --out")
    return args.out


def _cmd_angles(args) -> int:
    camera, _ = _require_calibration(args)
    out = _require_out(args)
    grid = patch_angles(camera, args.patch_size)
    if args.format == "bin":
        formats.write_anglemap_bin(out, grid)
    else:
        formats.write_anglemap_csv(out, grid)
    coords, _ = grid.flat_valid()
    frac = grid.n_valid / (grid.grid_dims[0] * grid.grid_dims[1])
    print(
        f"angle map: grid {grid.grid_dims[0]}x{grid.grid_dims[1]} "
        f"theta range [{coords[:, 0].min():.6f}, {coords[:, 0].max():.6f}] "
        f"valid fraction {frac:.4f} -> {out}"
    )
    return EXIT_OK


def _cmd_lut(args) -> int:
    camera, _ = _require_calibration(args)
    out = _require_out(args)
    lut = camera.build_lut(args.resolution)
    if args.format == "bin":
        formats.write_lut_bin(out, lut)
    else:
        formats.write_lut_csv(out, lut)
    print(
        f"lut: {lut.resolution} entries, r_max {lut.r_max:.6f} px, "
        f"theta_max {lut.theta_max:.6f} rad -> {out}"
    )
    return EXIT_OK


def _cmd_project(args) -> int:
    camera, _ = _require_calibration(args)
    u, v = camera.project(args.theta, args.phi)
    print(f"{u!r} {v!r}")
    return EXIT_OK


def _cmd_unproject(args) -> int:
    camera, _ = _require_calibration(args)
    coord = camera.unproject_newton(args.u, args.v, iterations=args.iterations)
    print(f"{coord.theta!r} {coord.phi!r}")
    return EXIT_OK


def _cmd_selfcheck(args) -> int:
    report = experiments.selfcheck(seed=args.seed)
    for result in report.results:
        print(result.line())
    if args.out:
        formats.write_report_yaml(args.out, report.as_dict())
    print(f"selfcheck: {'all passed' if report.all_passed else 'FAILURES PRESENT'}")
    return EXIT_OK if report.all_passed else EXIT_RUNTIME


def _parse_encodings(raw: str) -> tuple[str, ...]:
    names = tuple(s.strip() for s in raw.split(",") if s.strip())
    unknown = set(names) - set(ENCODINGS)
    if unknown:
        raise ConfigError(f"unknown encodings {sorted(unknown)}")
    return names


def _cmd_bench(args) -> int:
    camera, _ = _require_calibration(args)
    out = _require_out(args)
    config = RetrievalBenchConfig(
        camera=camera,
        patch_size=args.patch_size,
        n_queries=args.n_queries,
        seed=args.seed,
        encodings=_parse_encodings(args.encodings),
        feature_dim=args.dim,
    )
    report = experiments.retrieval_bench(config)
    formats.write_report_yaml(out, report.as_dict())
    header, rows = report.csv_rows()
    formats.write_csv_table(out + ".csv", header, rows)
    for score in report.scores:
        print(
            f"bench[{score.encoding}] top1={score.top1_accuracy:.4f} "
            f"periphery={score.periphery_accuracy:.4f} "
            f"mean_rank={score.mean_rank:.2f} ({score.runtime_s:.2f}s)"
        )
    if report.degenerate_camera:
        print("warning: camera distortion is negligible (extent ratio <= 1.5)")
    print(f"report -> {out}")
    return EXIT_OK


def _cmd_lift(args) -> int:
    camera, extrinsics = _require_calibration(args, need_extrinsics=True)
    out = _require_out(args)
    config = LiftConfig(
        extent=tuple(args.extent),
        resolution=args.resolution,
        patch_size=args.patch_size,
        feature_dim=args.dim,
        seed=args.seed,
    )
    report = experiments.bev_roundtrip(
        camera,
        extrinsics,
        CheckerPattern(square=args.checker, origin=tuple(args.checker_origin)),
        config,
    )
    formats.write_report_yaml(out, report.as_dict())
    header, rows = report.csv_rows()
    formats.write_csv_table(out + ".csv", header, rows)
    for score in report.scores:
        print(
            f"lift[{score.encoding}] overall={score.overall_accuracy:.4f} "
            f"peripheral={score.peripheral_accuracy:.4f} ({score.runtime_s:.2f}s)"
        )
    print(f"report -> {out} (visible cells: {report.n_visible}, keys: {report.n_keys})")
    return EXIT_OK


_COMMANDS = {
    "angles": _cmd_angles,
    "lut": _cmd_lut,
    "project": _cmd_project,
    "unproject": _cmd_unproject,
    "selfcheck": _cmd_selfcheck,
    "bench": _cmd_bench,
    "lift": _cmd_lift,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FishropeError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
