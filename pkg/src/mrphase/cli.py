"""Command-line entry point: simulate, profile, fit, predict, evaluate, replay.

Exit codes: 0 ok, 2 bad input file, 3 bad or insufficient data,
4 usage error, 5 evaluation gate breached.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .benchsuite import default_suite, load_suite, run_suite
from .domain import ClusterProfile, SchemaError, load_cluster, load_json, load_workload
from .predictor import CustomTimes, MissingCustomTimeError, predict_job
from .profiler import MissingSamplesError, SampleSet, SweepConfig, build_grid, phase_count_summary, run_profile
from .regress import PhaseModelSet, RegressionError, fit_phase_models, fit_summary
from .simcluster import simulate_job
from .tracelog import LogDocument, LogParseError, emit_log, job_metrics, parse_log

log = logging.getLogger("mrphase")

EXIT_OK, EXIT_INPUT, EXIT_DATA, EXIT_USAGE, EXIT_GATE = 0, 2, 3, 4, 5
MANIFEST = "manifest.json"
PATH_FLAGS = ("cluster", "sweep", "models", "workload", "suite", "samples", "from_log")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        self.code = code
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2, which we reserve for input errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read(loader, path: str | None, what: str):
    if path is None:
        return None
    try:
        return loader(path)
    except FileNotFoundError:
        raise CliError(f"{what} file not found: {path}", EXIT_INPUT) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}", EXIT_INPUT) from None
    except (SchemaError, LogParseError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from None


def _cluster(args) -> ClusterProfile:
    return _read(load_cluster, args.cluster, "cluster") or ClusterProfile()


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _manifest(args, out: Path) -> None:
    inputs = {k: str(Path(getattr(args, k)).resolve()) for k in PATH_FLAGS if getattr(args, k, None)}
    options = {k: v for k, v in vars(args).items() if k not in (*PATH_FLAGS, "func", "out", "command", "verbose")}
    doc = {
        "command": args.command,
        "inputs": inputs,
        "options": options,
        "seed": getattr(args, "seed", None),
        "output_dir": str(out.resolve()),
        "tool_version": __version__,
    }
    _write(out, MANIFEST, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --- commands ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    cluster = _cluster(args)
    workload = _read(load_workload, args.workload, "workload")
    if workload is None:
        raise CliError("simulate needs --workload", EXIT_USAGE)
    trace = simulate_job(cluster, workload, args.seed)
    out = Path(args.out)
    _write(out, "job.log", emit_log(trace).text())
    _manifest(args, out)
    print(f"{trace.job_id}: {len(trace.tasks)} tasks, total {trace.total_ms:.1f} ms")
    return EXIT_OK


def cmd_profile(args) -> int:
    cluster = _cluster(args)
    sweep = _read(lambda p: SweepConfig.from_dict(load_json(p)), args.sweep, "sweep") or SweepConfig()
    try:
        grid = build_grid(sweep, seed=args.seed)
    except ValueError as exc:
        raise CliError(f"sweep: {exc}", EXIT_INPUT) from None
    samples = run_profile(cluster, grid)
    out = Path(args.out)
    samples.write_csv(out)
    _manifest(args, out)
    print(f"{len(grid)} benchmark points")
    print(phase_count_summary(samples))
    return EXIT_OK


def cmd_fit(args) -> int:
    if not args.samples:
        raise CliError("fit needs --samples <dir>", EXIT_USAGE)
    try:
        samples = SampleSet.read_csv(args.samples)
    except MissingSamplesError as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    except SchemaError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    try:
        models = fit_phase_models(samples, alpha=args.alpha, k=args.folds, seed=args.seed)
    except RegressionError as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    out = Path(args.out)
    _write(out, "models.json", models.to_json())
    summary = fit_summary(models)
    _write(out, "fit_summary.txt", summary + "\n")
    _manifest(args, out)
    print(summary)
    return EXIT_OK


def _custom_times(args, workload, cluster) -> CustomTimes:
    if args.from_log:
        trace = _read(lambda p: parse_log(LogDocument.read(p)), args.from_log, "reference log")
        return CustomTimes.from_metrics(job_metrics(trace))
    if args.rates:
        return CustomTimes.from_rates(workload, cluster)
    if args.tmap_ms is None:
        raise CliError("no custom map()/reduce() time source: pass --tmap-ms/--treduce-ms, "
                       "--from-log <reference log>, or --rates", EXIT_USAGE)
    return CustomTimes(args.tmap_ms, args.treduce_ms)


def cmd_predict(args) -> int:
    models = _read(PhaseModelSet.load, args.models, "models")
    workload = _read(load_workload, args.workload, "workload")
    if models is None or workload is None:
        raise CliError("predict needs --models and --workload", EXIT_USAGE)
    cluster = _cluster(args)
    custom = _custom_times(args, workload, cluster)
    try:
        prediction = predict_job(models, workload, cluster, custom)
    except MissingCustomTimeError as exc:
        raise CliError(f"{exc}; pass --treduce-ms or use --from-log/--rates", EXIT_USAGE) from None
    out = Path(args.out)
    _write(out, "prediction.json", prediction.to_json())
    _write(out, "prediction.txt", prediction.table() + "\n")
    _manifest(args, out)
    print(prediction.table())
    print(f"predicted total: {prediction.total_ms:.1f} ms ({prediction.total_ms / 1000:.1f} s)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    models = _read(PhaseModelSet.load, args.models, "models")
    if models is None:
        raise CliError("evaluate needs --models", EXIT_USAGE)
    cluster = _cluster(args)
    suite = _read(load_suite, args.suite, "suite") or default_suite()
    seeds = [args.seed + i for i in range(args.runs)]
    report = run_suite(models, cluster, suite, seeds)
    out = Path(args.out)
    _write(out, "suite_report.csv", report.to_csv())
    _write(out, "suite_report.md", report.to_markdown())
    _write(out, "breakdown.csv", report.breakdown_csv())
    _manifest(args, out)
    print(report.to_markdown(), end="")
    if report.mean_abs_error_pct > args.gate:
        print(f"gate breached: mean |Error%| {report.mean_abs_error_pct:.2f} > {args.gate}", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def cmd_replay(args) -> int:
    manifest = _read(load_json, args.manifest, "manifest")
    argv = [manifest["command"]]
    for key, value in manifest["inputs"].items():
        argv += [f"--{key.replace('_', '-')}", value]
    for key, value in manifest["options"].items():
        flag = f"--{key.replace('_', '-')}"
        if isinstance(value, bool):
            argv += [flag] if value else []
        elif value is not None:
            argv += [flag, str(value)]
    argv += ["--out", args.out or manifest["output_dir"]]
    return main(argv)


# --- wiring -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mrphase", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mrphase {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *flags):
        if "cluster" in flags:
            p.add_argument("--cluster", help="cluster profile JSON (default: built-in 8-container cluster)")
        if "seed" in flags:
            p.add_argument("--seed", type=int, default=42)
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="simulate one job and write its log")
    common(p, "cluster", "seed")
    p.add_argument("--workload", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("profile", help="run the benchmark sweep and write per-phase samples")
    common(p, "cluster", "seed")
    p.add_argument("--sweep", help="sweep configuration JSON (default: 512..5120 MB x 10 selectivities x 64/128 MB)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("fit", help="fit per-phase models from sample CSVs")
    common(p, "seed")
    p.add_argument("--samples", required=True, help="directory written by 'profile'")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--folds", type=int, default=10)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict one workload's completion time")
    common(p, "cluster")
    p.add_argument("--models", required=True)
    p.add_argument("--workload", required=True)
    p.add_argument("--tmap-ms", type=float, help="summed map() time over the job")
    p.add_argument("--treduce-ms", type=float, help="summed reduce() time over the job")
    p.add_argument("--from-log", help="reference-run log to take map()/reduce() totals from")
    p.add_argument("--rates", action="store_true", help="use the workload's per-record/per-key rates")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="predicted vs simulated times over a workload suite")
    common(p, "cluster", "seed")
    p.add_argument("--models", required=True)
    p.add_argument("--suite", help="suite JSON (default: built-in 14-workload suite)")
    p.add_argument("--runs", type=int, default=3, help="simulated runs per workload")
    p.add_argument("--gate", type=float, default=10.0, help="max mean |Error%%| for exit code 0")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: the manifest's)")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"mrphase: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
