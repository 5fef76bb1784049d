"""Command-line interface.

Subcommands: validate, mean, morph, simulate, test, export-obj.  Exit
codes: 0 success; 2 invalid tube geometry; 3 a non-intrinsic mean that
violates validity; 64 usage errors; 66 unreadable or malformed input;
73 output cannot be written.  All randomness flows from ``--seed``;
repeated runs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io as tube_io
from .model import InvalidETRepError, validate
from .shapespace import (
    SampleSet,
    feature_matrix,
    feature_names,
    intrinsic_mean,
    intrinsic_shape_mean,
    nonintrinsic_mean,
    nonintrinsic_shape_mean,
    normalize_sample,
)
from .simulate import simulate_population
from .stats import FeatureMatrix, two_sample_report

EX_OK = 0
EX_INVALID_GEOMETRY = 2
EX_MEAN_INVALID = 3
EX_USAGE = 64
EX_BAD_INPUT = 66
EX_CANT_WRITE = 73


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 64."""

    def error(self, message):
        raise CliError(EX_USAGE, f"{self.prog}: {message}")


def _read_etrep(path):
    try:
        return tube_io.read_etrep(path)
    except (OSError, tube_io.SchemaError) as exc:
        raise CliError(EX_BAD_INPUT, f"cannot read tube from {path}: {exc}") from exc


def _read_sample(inputs):
    """One directory, or an explicit list of files."""
    if len(inputs) == 1 and Path(inputs[0]).is_dir():
        target = inputs[0]
    else:
        target = inputs
    try:
        return tube_io.read_sample(target)
    except (OSError, tube_io.SchemaError, ValueError) as exc:
        # ValueError covers inconsistent members (mismatched section counts)
        raise CliError(EX_BAD_INPUT, f"cannot read sample: {exc}") from exc


def _write(writer, path, *args, **kwargs):
    try:
        writer(path, *args, **kwargs)
    except OSError as exc:
        raise CliError(EX_CANT_WRITE, f"cannot write {path}: {exc}") from exc


def _cmd_validate(args) -> int:
    tube = _read_etrep(args.tube)
    report = validate(tube)
    print("\n".join(report.lines()))
    return EX_OK if report.valid else EX_INVALID_GEOMETRY


def _cmd_mean(args) -> int:
    sample = _read_sample(args.inputs)
    try:
        if args.method == "intrinsic":
            mean = intrinsic_shape_mean(sample) if args.scaled else intrinsic_mean(sample)
            report = validate(mean)
            mean.metadata.update(_report_metadata(report))
            _write(lambda p: tube_io.write_etrep(mean, p), args.output)
            print("\n".join(report.lines()))
            return EX_OK
        state, report = (
            nonintrinsic_shape_mean(sample) if args.scaled else nonintrinsic_mean(sample)
        )
        print("\n".join(report.lines()))
        try:
            mean = state.to_etrep(metadata=_report_metadata(report))
        except ValueError as exc:
            print(f"mean cannot be expressed in parent-frame coordinates: {exc}", file=sys.stderr)
            return EX_MEAN_INVALID
        _write(lambda p: tube_io.write_etrep(mean, p), args.output)
        return EX_OK if report.valid else EX_MEAN_INVALID
    except InvalidETRepError as exc:
        print(f"invalid input tube: {exc}", file=sys.stderr)
        return EX_INVALID_GEOMETRY


def _report_metadata(report) -> dict:
    meta = {"valid": str(report.valid).lower()}
    failing = report.failing_indices()
    if failing:
        meta["invalid_sections"] = " ".join(str(i) for i in failing)
    return meta


def _cmd_morph(args) -> int:
    start = _read_etrep(args.start)
    end = _read_etrep(args.end)
    try:
        paths = tube_io.export_morph(
            start, end, steps=args.steps, method=args.method,
            directory=args.output, ring_samples=args.ring_samples, caps=args.caps,
        )
    except InvalidETRepError as exc:
        print(f"invalid input tube: {exc}", file=sys.stderr)
        return EX_INVALID_GEOMETRY
    except ValueError as exc:
        raise CliError(EX_USAGE, str(exc)) from exc
    except OSError as exc:
        raise CliError(EX_CANT_WRITE, f"cannot write morph sequence: {exc}") from exc
    print(f"wrote {len(paths)} meshes and validity.csv to {args.output}")
    return EX_OK


def _cmd_simulate(args) -> int:
    try:
        config = tube_io.load_simulation_config(args.config)
    except (OSError, tube_io.SchemaError) as exc:
        raise CliError(EX_BAD_INPUT, f"cannot read config {args.config}: {exc}") from exc
    try:
        sample = simulate_population(config)
    except InvalidETRepError as exc:
        print(f"invalid reference tube: {exc}", file=sys.stderr)
        return EX_INVALID_GEOMETRY
    try:
        paths = tube_io.write_sample_dir(sample, args.output, prefix="sim")
    except OSError as exc:
        raise CliError(EX_CANT_WRITE, f"cannot write population: {exc}") from exc
    print(f"wrote {len(paths)} tubes to {args.output}")
    return EX_OK


def _cmd_test(args) -> int:
    group_a = _read_sample(args.group_a)
    group_b = _read_sample(args.group_b)
    try:
        if args.scaled:
            group_a = normalize_sample(group_a)
            group_b = normalize_sample(group_b)
        names = tuple(feature_names(group_a.n))
        matrix_a = FeatureMatrix(feature_matrix(group_a), names)
        matrix_b = FeatureMatrix(feature_matrix(group_b), tuple(feature_names(group_b.n)))
        report = two_sample_report(
            matrix_a, matrix_b, n_permutations=args.n_permutations,
            seed=args.seed, alpha=args.alpha, scaled=args.scaled,
        )
    except InvalidETRepError as exc:
        print(f"invalid input tube: {exc}", file=sys.stderr)
        return EX_INVALID_GEOMETRY
    except ValueError as exc:
        raise CliError(EX_USAGE, str(exc)) from exc
    _write(lambda p: tube_io.dump_json(report.to_dict(), p), args.output)
    significant = int(report.significant_adjusted.sum())
    print(
        f"global p-value: {report.global_p} "
        f"({significant} of {len(names)} features significant at alpha={args.alpha})"
    )
    return EX_OK


def _cmd_export_obj(args) -> int:
    tube = _read_etrep(args.tube)
    try:
        _write(
            lambda p: tube_io.export_obj(tube, p, ring_samples=args.ring_samples, caps=args.caps),
            args.output,
        )
    except InvalidETRepError as exc:
        print(f"invalid tube geometry: {exc}", file=sys.stderr)
        return EX_INVALID_GEOMETRY
    except ValueError as exc:
        raise CliError(EX_USAGE, str(exc)) from exc
    print(f"wrote {args.output}")
    return EX_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="etrep", description="Discrete elliptical tube toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    cmd = commands.add_parser("validate", parents=[], help="check a tube and print its validity report")
    cmd.add_argument("tube", help="tube JSON file")
    cmd.set_defaults(func=_cmd_validate)

    cmd = commands.add_parser("mean", help="average a sample of tubes")
    cmd.add_argument("inputs", nargs="+", help="tube JSON files, or one directory of them")
    cmd.add_argument("--method", required=True, choices=["intrinsic", "nonintrinsic"])
    cmd.add_argument("--scaled", action="store_true", help="normalize sizes before averaging")
    cmd.add_argument("-o", "--output", required=True, help="output tube JSON path")
    cmd.set_defaults(func=_cmd_mean)

    cmd = commands.add_parser("morph", help="export a mesh sequence between two tubes")
    cmd.add_argument("start", help="tube JSON file")
    cmd.add_argument("end", help="tube JSON file")
    cmd.add_argument("--method", required=True, choices=["intrinsic", "nonintrinsic"])
    cmd.add_argument("--steps", type=int, default=20, help="number of segments (writes steps+1 meshes)")
    cmd.add_argument("-M", "--ring-samples", type=int, default=32, help="vertices per cross-section ring")
    cmd.add_argument("--caps", action="store_true", help="close the tube ends")
    cmd.add_argument("-o", "--output", required=True, help="output directory")
    cmd.set_defaults(func=_cmd_morph)

    cmd = commands.add_parser("simulate", help="draw a population around a reference tube")
    cmd.add_argument("config", help="simulation config JSON file")
    cmd.add_argument("-o", "--output", required=True, help="output directory")
    cmd.set_defaults(func=_cmd_simulate)

    cmd = commands.add_parser("test", help="two-sample permutation test between groups of tubes")
    cmd.add_argument("--group-a", nargs="+", required=True, help="tube files or one directory")
    cmd.add_argument("--group-b", nargs="+", required=True, help="tube files or one directory")
    cmd.add_argument("-N", "--n-permutations", type=int, default=10_000)
    cmd.add_argument("--seed", type=int, default=0)
    cmd.add_argument("--alpha", type=float, default=0.1, help="significance level for the report")
    cmd.add_argument("--scaled", action="store_true", help="normalize sizes before testing")
    cmd.add_argument("-o", "--output", required=True, help="output report JSON path")
    cmd.set_defaults(func=_cmd_test)

    cmd = commands.add_parser("export-obj", help="write a tube surface mesh")
    cmd.add_argument("tube", help="tube JSON file")
    cmd.add_argument("-M", "--ring-samples", type=int, default=32, help="vertices per cross-section ring")
    cmd.add_argument("--caps", action="store_true", help="close the tube ends")
    cmd.add_argument("-o", "--output", required=True, help="output OBJ path")
    cmd.set_defaults(func=_cmd_export_obj)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(exc.message, file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
