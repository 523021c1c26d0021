"""Command-line interface: synth, fit, augment, predict, evaluate, report.

Configuration lives in a single JSON file; every flag can override it.
Exit codes: 0 success, 2 validation/config error, 1 anything else.
"""

import argparse
import json
import sys

import numpy as np

from .experiment import (MODEL_NAMES, RunConfig, StageError, augment_outputs,
                         dataset_fingerprint, fit_model, predict_vb_series,
                         resolve_dataset, run_experiment, synth_outputs,
                         write_manifest, _OutputTracker, _write_csv_rows)
from .serialize import load_model, save_model
from .validation import ValidationError


def _load_config(args):
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "model", None):
        overrides["models"] = [args.model]
    if getattr(args, "train", None):
        overrides["train"] = args.train
    if getattr(args, "test", None):
        overrides["test"] = args.test
    if args.out is not None:
        overrides["out"] = args.out
    cfg = RunConfig.from_dict(doc, overrides)
    return cfg, doc


def cmd_synth(args):
    cfg, doc = _load_config(args)
    spec = doc.get("generator")
    if spec is None and isinstance(cfg.train, dict):
        spec = cfg.train
    if spec is None:
        raise ValidationError("synth needs a 'generator' spec in the config")
    if args.seed is not None:
        spec = dict(spec, seed=args.seed)
    paths = synth_outputs(spec, cfg.out, cfg.schema)
    for p in paths:
        print(p)
    return 0


def cmd_fit(args):
    cfg, _ = _load_config(args)
    if len(cfg.models) != 1:
        raise ValidationError("fit takes exactly one model (--model)")
    name = cfg.models[0]
    train = resolve_dataset(cfg.train, cfg.schema)
    model = fit_model(name, train, cfg)
    tracker = _OutputTracker(cfg.out)
    path = tracker.path(f"model_{name}.json")
    save_model(model, path)
    write_manifest(tracker, cfg, {"train": dataset_fingerprint(cfg.train)})
    print(path)
    return 0


def cmd_augment(args):
    cfg, _ = _load_config(args)
    path, n_syn = augment_outputs(cfg, cfg.out)
    print(f"{path} (+{n_syn} synthetic points)")
    return 0


def cmd_predict(args):
    cfg, _ = _load_config(args)
    model = load_model(args.model_file)
    from .serialize import model_to_document

    kind = model_to_document(model)["kind"]
    test = resolve_dataset(cfg.test if cfg.test is not None else cfg.train,
                           cfg.schema)
    tracker = _OutputTracker(cfg.out)
    for ti, tr in enumerate(test.trajectories):
        series = predict_vb_series(kind if kind in MODEL_NAMES else "gbr",
                                   model, tr)
        path = tracker.path(f"pred_{ti:03d}.csv")
        _write_csv_rows(path, ["t", "vx", "vy", "omega"],
                        np.column_stack([tr.t, series]))
        print(path)
    write_manifest(tracker, cfg)
    return 0


def cmd_evaluate(args):
    cfg, _ = _load_config(args)
    report = run_experiment(cfg, emit="losses")
    for name in cfg.models:
        print(f"{name}: zscore_loss={report.zscore[name]:.6f}")
    return 0


def cmd_report(args):
    cfg, _ = _load_config(args)
    report = run_experiment(cfg)
    for name in cfg.models:
        line = f"{name}: zscore_loss={report.zscore[name]:.6f}"
        if name in report.rmse_vb:
            line += f" rmse_vb={report.rmse_vb[name]:.6f}"
        print(line)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="motilearn",
        description="Learn motility maps from motion data and evaluate "
                    "them against phase-based baselines.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory")

    data_flags = argparse.ArgumentParser(add_help=False)
    data_flags.add_argument("--train", nargs="+", default=None,
                            help="training CSV paths")
    data_flags.add_argument("--test", nargs="+", default=None,
                            help="test CSV paths")
    data_flags.add_argument("--model", choices=MODEL_NAMES, default=None)

    sub.add_parser("synth", parents=[common],
                   help="generate synthetic datasets")
    sub.add_parser("fit", parents=[common, data_flags],
                   help="fit one model and save it")
    sub.add_parser("augment", parents=[common, data_flags],
                   help="export the ruled-surface augmented dataset")
    pred = sub.add_parser("predict", parents=[common, data_flags],
                          help="predict body velocities with a saved model")
    pred.add_argument("--model-file", required=True)
    sub.add_parser("evaluate", parents=[common, data_flags],
                   help="fit and score models on a test set")
    sub.add_parser("report", parents=[common, data_flags],
                   help="full experiment: models, losses, plot data")
    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "fit": cmd_fit,
    "augment": cmd_augment,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc.cause, ValidationError) else 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
