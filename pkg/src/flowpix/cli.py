"""Command-line entry point: one subcommand per pipeline stage.

Configuration precedence: built-in defaults < --config JSON file < explicit
flags. Exit codes: 0 success, 1 usage/config error, 2 data error, 3
internal error. The only environment variable read is FLOWPIX_VERBOSE
(non-empty enables tracebacks on failure).
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from typing import Optional, Sequence

from .errors import ConfigError, DataError, PipelineError, SchemaError
from .pipeline import (
    PipelineConfig,
    cmd_encode,
    cmd_eval,
    cmd_predict,
    cmd_report,
    cmd_train,
    cmd_verify,
)
from .util import read_json


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    # Every stage accepts the full config: artifact fingerprints cover the
    # whole run, so all stages of one run must agree on every field.
    parser.add_argument("--config", help="JSON file with PipelineConfig fields")
    parser.add_argument("--out-dir", dest="out_dir", help="run directory for artifacts")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--catalog", dest="catalog_path", help="feature catalog JSON")
    parser.add_argument("--labels", dest="labels_path", help="label alias JSON")
    parser.add_argument("--test-per-class", dest="test_per_class", type=int)
    parser.add_argument("--val-fraction", dest="val_fraction", type=float)
    parser.add_argument("--stats-mode", dest="stats_mode", choices=("train-only", "global"))
    parser.add_argument("--task", choices=("binary", "multiclass"))
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--momentum", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument(
        "--no-determinism", dest="deterministic", action="store_false",
        default=None, help="allow non-deterministic backend kernels",
    )


def _build_config(args: argparse.Namespace, extra: Optional[dict] = None) -> PipelineConfig:
    file_values = read_json(args.config) if getattr(args, "config", None) else None
    keys = (
        "inputs", "out_dir", "catalog_path", "labels_path", "seed",
        "test_per_class", "val_fraction", "stats_mode", "task",
        "learning_rate", "momentum", "epochs", "batch_size", "deterministic",
    )
    overrides = {k: getattr(args, k) for k in keys if hasattr(args, k)}
    if not overrides.get("inputs"):
        # argparse yields [] for an absent nargs="*" positional; treat it as
        # unset so config-file inputs survive.
        overrides.pop("inputs", None)
    if extra:
        overrides.update(extra)
    return PipelineConfig.from_sources(file_values, **overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowpix",
        description=(
            "Convert flow-feature CSVs to images, train a ResNet18 DoS/DDoS "
            "classifier, and evaluate it."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="ingest CSVs and build the image dataset")
    p.add_argument("inputs", nargs="*", default=None, help="CSV files, globs, or directories")
    _add_config_flags(p)

    p = sub.add_parser("train", help="train on the encoded dataset")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="evaluate the checkpoint on the test split")
    p.add_argument(
        "--compare-reference", action="store_true",
        help="also check the result against the published full-dataset numbers",
    )
    _add_config_flags(p)

    p = sub.add_parser("predict", help="classify a directory of PNG images")
    p.add_argument("images", help="directory containing PNGs")
    _add_config_flags(p)

    p = sub.add_parser("report", help="re-render summary/charts from a saved report")
    p.add_argument("--from", dest="report_path", help="path to an eval_report.json")
    _add_config_flags(p)

    p = sub.add_parser("verify", help="check artifact fingerprint consistency")
    p.add_argument("run_dir", help="run directory to verify")

    p = sub.add_parser("synth", help="generate a synthetic CSV fixture")
    p.add_argument("out", help="output CSV path")
    p.add_argument("--classes", default="Syn:360,BENIGN:360",
                   help="comma-separated label:rows pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--malformed-fraction", type=float, default=0.0)
    return parser


def _run_synth(args: argparse.Namespace) -> None:
    from .synth import SynthSpec, default_feature_names, generate, separable_classes

    pairs = []
    for item in args.classes.split(","):
        label, _, rows = item.partition(":")
        if not rows:
            raise ConfigError(f"bad --classes entry {item!r}, expected label:rows")
        pairs.append((label.strip(), int(rows)))
    spec = SynthSpec(
        classes=separable_classes([p[0] for p in pairs], [p[1] for p in pairs]),
        feature_names=default_feature_names(),
        seed=args.seed,
        malformed_fraction=args.malformed_fraction,
    )
    csv_path, sidecar = generate(spec, args.out)
    print(f"wrote {csv_path} (+ {sidecar.name})")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    verbose = bool(os.environ.get("FLOWPIX_VERBOSE"))
    try:
        if args.command == "encode":
            extra = {"inputs": tuple(args.inputs)} if args.inputs else {}
            cmd_encode(_build_config(args, extra))
        elif args.command == "train":
            cmd_train(_build_config(args))
        elif args.command == "eval":
            report = cmd_eval(_build_config(args))
            if args.compare_reference:
                from .metrics import compare_to_reference

                problems = compare_to_reference(report, args.task or "multiclass")
                if problems:
                    for problem in problems:
                        print(f"reference check: {problem}", file=sys.stderr)
                    return 2
                print("reference check: within tolerance")
        elif args.command == "predict":
            cmd_predict(_build_config(args), args.images)
        elif args.command == "report":
            cmd_report(_build_config(args), args.report_path)
        elif args.command == "verify":
            cmd_verify(args.run_dir)
        elif args.command == "synth":
            _run_synth(args)
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if verbose:
            traceback.print_exc()
        return 1
    except (DataError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if verbose:
            traceback.print_exc()
        return 2
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if verbose:
            traceback.print_exc()
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        if verbose:
            traceback.print_exc()
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
