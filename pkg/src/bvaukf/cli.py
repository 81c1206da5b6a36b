"""Command-line interface.

::

    bvaukf datagen  --out DATA
    bvaukf train    --data DATA --kind pose  --out MODELS
    bvaukf train    --data DATA --kind force --out MODELS
    bvaukf predict  --models MODELS --input DATA/A_000.csv --window 0 --out PRED
    bvaukf evaluate --models MODELS --data DATA --out REPORT

Every command accepts ``--config PATH`` and ``--seed N``.  Exit codes: 0 on
success, 2 for configuration errors, 3 for data errors, 4 for numerical
failures.
"""

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import config as config_mod
from . import seqmodel
from .datagen import CSV_HEADER, build_dataset, load_dataset, read_trajectory_csv, write_dataset
from .errors import BvaukfError, ConfigError, DataError, NumericError
from .evaluation import compare_report, select_test_windows
from .pipeline import refine, training_windows

log = logging.getLogger("bvaukf")

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

PREDICTION_HEADER = (
    ["step", "t"] + CSV_HEADER[1:] + ["var_" + c for c in CSV_HEADER[1:]]
    + ["elbow_x", "elbow_y", "elbow_z", "wrist_x", "wrist_y", "wrist_z"]
)


def _fmt(v):
    return f"{v:.9g}"


def _model_path(models_dir, kind):
    return os.path.join(models_dir, f"model_{kind}.json")


def _load_model(models_dir, kind):
    path = _model_path(models_dir, kind)
    try:
        model = seqmodel.load(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"{path} is not a valid checkpoint: {exc}") from exc
    if model.kind != kind:
        raise DataError(f"{path} holds a {model.kind} model, expected {kind}")
    return model


def cmd_datagen(cfg, args):
    d = cfg.data
    bundle = build_dataset(d.counts, cfg.anthropometrics, cfg.seed, d.N, d.M, d.stride, cfg.ukf.T_s)
    write_dataset(bundle, args.out)
    sizes = {k: len(v) for k, v in bundle.splits.items()}
    log.info("wrote %d trajectories to %s (%s)", sum(sizes.values()), args.out, sizes)


def cmd_train(cfg, args):
    bundle = load_dataset(args.data)
    d = cfg.data
    windows = {split: training_windows(bundle.splits[split], args.kind, cfg.anthropometrics,
                                       d.N, d.M, d.stride, cfg.ukf.T_s)
               for split in ("train", "val")}
    log.info("%s model: %d training and %d validation windows", args.kind,
             len(windows["train"]), len(windows["val"]))
    model = seqmodel.train(
        windows["train"], cfg.train_config(args.kind), args.kind, windows["val"] or None,
        log=lambda e, tr, va: log.info("epoch %d  train %.6g  val %.6g", e + 1, tr, va))
    os.makedirs(args.out, exist_ok=True)
    seqmodel.save(model, _model_path(args.out, args.kind))
    with open(os.path.join(args.out, f"history_{args.kind}.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for e, (tr, va) in enumerate(zip(model.history["train"], model.history["val"])):
            w.writerow([e + 1, _fmt(tr), _fmt(va)])


def cmd_predict(cfg, args):
    model_a = _load_model(args.models, "pose")
    model_b = _load_model(args.models, "force")
    try:
        traj = read_trajectory_csv(args.input)
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc}") from exc
    N = cfg.data.N
    start = args.window * cfg.data.stride
    if args.window < 0 or start + N > len(traj):
        raise DataError(f"window {args.window} needs frames {start}..{start + N - 1}, "
                        f"trajectory has {len(traj)}")
    observed = traj.poses[start:start + N]
    result = refine(model_a, model_b, observed, cfg.ukf, cfg.anthropometrics, cfg.eval.K, cfg.seed)
    t_last = traj.t[start + N - 1]
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "prediction.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_HEADER)
        for m in range(len(result)):
            row = np.concatenate([[t_last + (m + 1) * cfg.ukf.T_s], result.poses[m],
                                  result.pose_variances[m], result.elbow[m], result.wrist[m]])
            w.writerow([m + 1] + [_fmt(v) for v in row])
    log.info("wrote %d refined steps to %s", len(result), path)


def cmd_evaluate(cfg, args):
    model_a = _load_model(args.models, "pose")
    model_b = _load_model(args.models, "force")
    bundle = load_dataset(args.data)
    d = cfg.data
    seed = cfg.derived_seed("eval")
    windows = select_test_windows(bundle.splits["test"], cfg.eval.windows_per_class, seed,
                                  d.N, d.M, d.stride)
    if not windows:
        raise DataError("test split has no windows")
    log.info("evaluating %d test windows", len(windows))
    report = compare_report(windows, model_a, model_b, cfg.ukf, cfg.anthropometrics, cfg.eval.K, seed)
    os.makedirs(args.out, exist_ok=True)
    report.write_json(os.path.join(args.out, "report.json"))
    report.write_curves(os.path.join(args.out, "curves.csv"))
    for row in report.rows:
        log.info("%s %-5s AERP %6.2f%%  AMERP %6.2f%%  improved %.2f", row["class"], row["joint"],
                 row["aerp"], row["amerp"], row["improved_fraction"])


def cmd_config(cfg, args):
    text = config_mod.dumps(cfg)
    if args.out is None:
        sys.stdout.write(text)
    else:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        with open(args.out, "w") as fh:
            fh.write(text)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults when omitted)")
    common.add_argument("--seed", type=int, help="override the configured run seed")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="bvaukf", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", parents=[common], help="generate the synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("train", parents=[common], help="train the pose or force model")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--kind", required=True, choices=("pose", "force"))
    p.add_argument("--out", required=True, help="model directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="refine the prediction for one window")
    p.add_argument("--models", required=True, help="directory holding both checkpoints")
    p.add_argument("--input", required=True, help="trajectory CSV")
    p.add_argument("--window", type=int, default=0, help="window index (start = index * stride)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="compare baseline and filtered predictions")
    p.add_argument("--models", required=True, help="directory holding both checkpoints")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("config", parents=[common], help="print the resolved configuration")
    p.add_argument("--out", help="write to this file instead of stdout")
    p.set_defaults(func=cmd_config)
    return parser


def _exit_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    return EXIT_DATA


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = config_mod.load(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg.seed = args.seed
    except ConfigError as exc:
        print(f"bvaukf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(cfg, args)
    except BvaukfError as exc:
        stage = exc.stage or args.command
        kind = {EXIT_CONFIG: "config", EXIT_DATA: "data", EXIT_NUMERIC: "numeric"}[_exit_code(exc)]
        print(f"bvaukf: {kind} error in {stage}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
