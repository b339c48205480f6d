"""Command-line front door: simulate | validate | featurize | evaluate.

Machine artifacts go to files, the human summary to stdout, diagnostics to
stderr. Exit codes: 0 on success with all artifacts fully written, 1 on
runtime/stage failures (partial outputs are removed), 2 on usage errors and
missing inputs. All randomness flows from --seed; omitting it picks a random
seed that is logged to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import secrets
import sys
from pathlib import Path

from . import __version__
from .dataset import (
    DatasetError,
    parse_dataset,
    parse_sidecar,
    serialize_dataset,
    serialize_sidecar,
    validate,
)
from .evaluation import (
    KFOLD_CHOICES,
    EvaluationError,
    PipelineConfig,
    PipelineStageError,
    run_pipeline,
)
from .features import build_feature_matrix, segment
from .simulator import ScenarioError, load_scenario, simulate


class _ArtifactWriter:
    """Writes output files atomically and removes them all if a later step fails."""

    def __init__(self) -> None:
        self.written: list[Path] = []

    def write(self, path: str | Path, text: str) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
        self.written.append(path)

    def rollback(self) -> None:
        for path in self.written:
            try:
                path.unlink()
            except OSError:
                pass
        self.written.clear()


class _UsageError(Exception):
    """Bad invocation (missing input file); maps to exit code 2."""


def _default_sidecar(dataset_path: str) -> str:
    return str(Path(dataset_path).with_suffix(".sidecar"))


def _require_file(path: str) -> None:
    if not Path(path).is_file():
        raise _UsageError(f"no such file: {path}")


def _load_dataset(path: str, sidecar: str | None):
    sidecar = sidecar or _default_sidecar(path)
    _require_file(path)
    _require_file(sidecar)
    meta = parse_sidecar(Path(sidecar).read_text(encoding="utf-8"))
    return parse_dataset(Path(path).read_text(encoding="utf-8"), meta)


def _effective_seed(seed: int | None, fallback: int | None = None) -> int:
    if seed is not None:
        return seed
    if fallback is not None:
        print(f"seed: {fallback} (from scenario)", file=sys.stderr)
        return fallback
    chosen = secrets.randbits(32)
    print(f"seed: {chosen} (randomly selected)", file=sys.stderr)
    return chosen


def _cmd_simulate(args: argparse.Namespace) -> int:
    _require_file(args.scenario)
    scenario = load_scenario(Path(args.scenario).read_text(encoding="utf-8"))
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    else:
        _effective_seed(None, scenario.seed)
    dataset = simulate(scenario)
    writer = _ArtifactWriter()
    try:
        writer.write(args.out, serialize_dataset(dataset))
        writer.write(args.sidecar or _default_sidecar(args.out), serialize_sidecar(dataset))
    except Exception:
        writer.rollback()
        raise
    print(f"wrote {len(dataset.records)} records to {args.out}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.dataset, args.sidecar)
    report = validate(dataset)
    print(report)
    return 0 if report.is_valid else 1


def _cmd_featurize(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.dataset, args.sidecar)
    windows = segment(dataset, args.window_s)
    matrix = build_feature_matrix(windows)
    writer = _ArtifactWriter()
    try:
        writer.write(args.out, matrix.to_csv())
    except Exception:
        writer.rollback()
        raise
    print(f"wrote {matrix.n_rows} windows x {matrix.n_features} features to {args.out}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    if args.task == "detection" and args.representation == "raw":
        print(
            "error: --task detection only supports --representation features",
            file=sys.stderr,
        )
        return 2
    dataset = _load_dataset(args.dataset, args.sidecar)
    seed = _effective_seed(args.seed)
    families = tuple(f.strip() for f in args.models.split(",") if f.strip()) if args.models else ()
    config = PipelineConfig(
        families=families,
        window_s=args.window_s,
        k=args.k,
        seed=seed,
        split_mode=args.split,
    )
    report = run_pipeline(dataset, args.task, args.representation, config)
    report.run_config = {
        "dataset": args.dataset,
        "sidecar": args.sidecar or _default_sidecar(args.dataset),
        "task": args.task,
        "representation": args.representation,
        "models": list(families),
        "window_s": args.window_s,
        "k": args.k,
        "seed": seed,
        "split": args.split,
        "jobs": args.jobs,
    }
    writer = _ArtifactWriter()
    scores_path = args.scores_csv or str(Path(args.out).with_suffix(".scores.csv"))
    try:
        writer.write(args.out, report.to_json())
        writer.write(scores_path, report.scores_csv())
    except Exception:
        writer.rollback()
        raise
    print(report.summary())
    print(f"cadence: {report.prediction_cadence}")
    print(f"report: {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rssi-occupancy",
        description="Occupancy detection and counting from BLE RSSI time series.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="render a scenario into a labeled dataset")
    p_sim.add_argument("--scenario", required=True, help="scenario config file")
    p_sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_sim.add_argument("--out", required=True, help="output dataset CSV")
    p_sim.add_argument("--sidecar", default=None, help="output sidecar path (default: <out>.sidecar)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_val = sub.add_parser("validate", help="report dataset invariant violations")
    p_val.add_argument("dataset", help="dataset CSV")
    p_val.add_argument("--sidecar", default=None, help="sidecar path (default: <dataset>.sidecar)")
    p_val.set_defaults(func=_cmd_validate)

    p_feat = sub.add_parser("featurize", help="write the windowed feature matrix CSV")
    p_feat.add_argument("dataset", help="dataset CSV")
    p_feat.add_argument("--sidecar", default=None)
    p_feat.add_argument("--window-s", type=float, default=1.0, dest="window_s")
    p_feat.add_argument("--out", required=True, help="output feature CSV")
    p_feat.set_defaults(func=_cmd_featurize)

    p_eval = sub.add_parser("evaluate", help="train, grid-search and score models")
    p_eval.add_argument("dataset", help="dataset CSV")
    p_eval.add_argument("--sidecar", default=None)
    p_eval.add_argument("--task", choices=("detection", "counting"), required=True)
    p_eval.add_argument(
        "--representation", choices=("features", "raw"), default="features"
    )
    p_eval.add_argument("--models", default="", help="comma-separated family list")
    p_eval.add_argument("--k", type=int, choices=KFOLD_CHOICES, default=5)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--window-s", type=float, default=1.0, dest="window_s")
    p_eval.add_argument("--split", choices=("random", "chronological"), default="random")
    p_eval.add_argument("--out", required=True, help="output report JSON")
    p_eval.add_argument("--scores-csv", default=None, help="per-config scores CSV path")
    p_eval.add_argument("--jobs", type=int, default=1, help="worker cap (recorded; execution is serial)")
    p_eval.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, ScenarioError, EvaluationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
