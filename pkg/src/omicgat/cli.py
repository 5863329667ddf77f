"""Command-line entry point wiring the full pipeline.

Subcommands: ``preprocess`` (load + clean + persist), ``select`` (per-fold
joint feature selection), ``train`` (per-fold graph training with fusion),
``evaluate`` (aggregate metrics) and ``biomarkers`` (ablation ranking).
Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import DataError, NumericError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="omicgat",
        description="multi-omic feature selection, graph-attention classification and biomarker ranking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="load, clean and persist a multi-omic dataset")
    p.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--variance-threshold",
        default="0.04",
        help="comma-separated per-omic thresholds, or one value for all (0 disables)",
    )

    p = sub.add_parser("select", help="joint feature selection per fold")
    p.add_argument("--data", required=True, help="preprocessed data directory")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--out", required=True, help="selection output directory")

    p = sub.add_parser("train", help="train graph models and fusion per fold")
    p.add_argument("--data", required=True)
    p.add_argument("--selection", required=True, help="directory written by select")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--modalities", default=None, help="comma-separated omic subset")
    p.add_argument(
        "--ablation",
        default=None,
        choices=["homogeneous", "no-edge-attr", "no-node-attr"],
    )
    p.add_argument("--jobs", type=int, default=1, help="fold worker processes")

    p = sub.add_parser("evaluate", help="recompute aggregate metrics for a run")
    p.add_argument("--run", required=True)

    p = sub.add_parser("biomarkers", help="rank features by ablation impact")
    p.add_argument("--run", required=True)
    p.add_argument("--metric", default="auroc", choices=["auroc", "wf1"])
    return parser


def _cmd_preprocess(args):
    from .data import load_dataset, preprocess, save_preprocessed

    ds = load_dataset(args.manifest)
    parts = [float(v) for v in str(args.variance_threshold).split(",")]
    if len(parts) == 1:
        parts = parts * ds.n_omics
    cleaned, provenance = preprocess(ds, parts)
    save_preprocessed(cleaned, args.out, provenance)
    for entry in provenance:
        print(
            f"{entry['omic']}: retained {entry['retained']} features "
            f"(-{entry['dropped_missing']} missing, -{entry['dropped_low_variance']} low variance)"
        )
    print(f"wrote {args.out}")


def _cmd_select(args):
    from .config import load_config, save_config
    from .pipeline import run_selection_stage

    cfg = load_config(args.config)
    plan = run_selection_stage(args.data, cfg, args.out)
    save_config(cfg, f"{args.out}/config.json")
    print(f"selected features for {plan.k} folds -> {args.out}")


def _cmd_train(args):
    from .config import load_config
    from .pipeline import run_training_stage

    cfg = load_config(args.config)
    modalities = args.modalities.split(",") if args.modalities else None
    summary = run_training_stage(
        args.data,
        args.selection,
        cfg,
        args.out,
        modalities=modalities,
        ablation=args.ablation,
        jobs=args.jobs,
    )
    for name, stats in sorted(summary.items()):
        mean = stats["mean"]
        std = stats["std"]
        if mean is None:
            print(f"{name}: undefined on all folds")
        else:
            print(f"{name}: {mean:.3f} +/- {std:.3f}")


def _cmd_evaluate(args):
    from .pipeline import evaluate_run

    summary = evaluate_run(args.run)
    print(json.dumps(summary, indent=2, sort_keys=True))


def _cmd_biomarkers(args):
    from .biomarkers import rank_biomarkers

    df = rank_biomarkers(args.run, metric=args.metric)
    print(df.head(30).to_string(index=False))
    print(f"wrote {args.run}/biomarkers.csv")


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "preprocess": _cmd_preprocess,
        "select": _cmd_select,
        "train": _cmd_train,
        "evaluate": _cmd_evaluate,
        "biomarkers": _cmd_biomarkers,
    }
    try:
        handlers[args.command](args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
