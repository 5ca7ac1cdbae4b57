"""``uq`` command-line driver.

Exit codes: 0 success, 2 configuration error, 3 training divergence, 4 I/O
or data-format error.
"""

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, config, serialize
from .data import gen_sharp, gen_smooth, load_csv, save_csv
from .ensemble import ensemble_train, member_predictions
from .errors import ConfigError, DataFormatError, TrainingDiverged
from .experiments import evaluate, fit, run_folds

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("jointuq")


def _write_json(path: Path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _write_history(path: Path, history) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, h in enumerate(history):
            fh.write(f"{i},{float(h)!r}\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _experiment(args) -> config.ExperimentConfig:
    if not args.config:
        raise ConfigError("--config is required (a JSON file or a preset name)", "--config")
    exp = config.load(args.config)
    if args.seed is not None:
        exp.train = exp.train.with_seed(args.seed)
    return exp


def _dataset(exp: config.ExperimentConfig, args):
    if getattr(args, "data", None):
        return load_csv(args.data, args.target if args.target is not None else -1)
    return exp.dataset.load(exp.base_dir)


def cmd_synth(args) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.kind == "smooth":
        data = gen_smooth(args.n, seed)
    else:
        data = gen_sharp(args.n, args.noisy_fraction, seed)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(data, out)
    log.info("wrote %d rows to %s", len(data), out)
    return EXIT_OK


def cmd_train(args) -> int:
    exp = _experiment(args)
    data = _dataset(exp, args)
    model = fit(data, exp.train)
    out = _out_dir(args)
    serialize.save(model, out / "model.json")
    _write_history(out / "history.csv", model.history)
    log.info("trained %s for %d epochs", exp.train.method, exp.train.epochs)
    return EXIT_OK


def cmd_eval(args) -> int:
    model = serialize.load(args.model)
    data = load_csv(args.data, args.target if args.target is not None else -1)
    metrics, curve = evaluate(model, data)
    out = _out_dir(args)
    _write_json(out / "metrics.json", metrics)
    if curve is not None:
        curve.to_csv(out / "retention.csv")
    return EXIT_OK


def cmd_folds(args) -> int:
    exp = _experiment(args)
    data = _dataset(exp, args)
    count = args.folds if args.folds is not None else exp.folds.count
    summary = run_folds(data, exp.train, count, exp.folds.train_fraction, exp.folds.seed, args.jobs)
    summary["config"] = exp.to_dict()
    _write_json(_out_dir(args) / "folds_summary.json", summary)
    return EXIT_OK


def cmd_ensemble(args) -> int:
    exp = _experiment(args)
    data = _dataset(exp, args)
    k = args.k if args.k is not None else exp.ensemble.k
    base_seed = exp.train.seed if args.seed is not None else exp.ensemble.base_seed
    model = ensemble_train(data, exp.train, k, base_seed, args.jobs)
    out = _out_dir(args)
    serialize.save(model, out / "ensemble.json")
    test = load_csv(args.test, args.target if args.target is not None else -1) if args.test else data
    metrics, curve = evaluate(model, test)
    metrics["members"] = k
    mus, expected = member_predictions(model, test.inputs)
    metrics["member_rmse"] = [float(np.sqrt(np.mean((test.targets - m) ** 2))) for m in mus]
    _write_json(out / "metrics.json", metrics)
    if curve is not None:
        curve.to_csv(out / "retention.csv")
    return EXIT_OK


def _parse_lambdas(text: str):
    """Comma list ``1e-3,0.1,1`` or log grid ``lo:hi:count``."""
    if ":" in text:
        lo, hi, num = text.split(":")
        return [float(v) for v in np.logspace(np.log10(float(lo)), np.log10(float(hi)), int(num))]
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_analyze_lambda(args) -> int:
    try:
        lambdas = _parse_lambdas(args.lambdas)
    except ValueError as exc:
        raise ConfigError(str(exc), "--lambdas") from None
    rows = analysis.lambda_curves(args.variant, args.l1, args.l2, lambdas)
    out = Path(args.out)
    if out.suffix != ".csv":
        out = out / "curves.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(analysis.CURVE_COLUMNS)
        for row in rows:
            writer.writerow([repr(float(row[c])) for c in analysis.CURVE_COLUMNS])
    return EXIT_OK


def _common(p, config_flag=True):
    if config_flag:
        p.add_argument("--config", help="experiment JSON file or preset name")
    p.add_argument("--out", required=True, help="output directory (or file for synth / analyze-lambda)")
    p.add_argument("--seed", type=int, default=None, help="override the training (or data) seed")
    p.add_argument("--jobs", type=int, default=1, help="maximum parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uq", description="Joint regressor/uncertainty-quantifier training.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic data set as CSV")
    _common(p, config_flag=False)
    p.add_argument("--kind", choices=["smooth", "sharp"], required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--noisy-fraction", type=float, default=0.8)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model; writes model.json and history.csv")
    _common(p)
    p.add_argument("--data", help="CSV overriding the config's data source")
    p.add_argument("--target", default=None, help="target column name or index for --data")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model; writes metrics.json and retention.csv")
    _common(p, config_flag=False)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("folds", help="random train/test folds; writes folds_summary.json")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--target", default=None)
    p.add_argument("--folds", type=int, default=None, help="override the fold count")
    p.set_defaults(func=cmd_folds)

    p = sub.add_parser("ensemble", help="train K pairs; writes ensemble.json and metrics.json")
    _common(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--data")
    p.add_argument("--test", help="CSV to evaluate on (default: the training data)")
    p.add_argument("--target", default=None)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("analyze-lambda", help="gradient scales and ratios R, Q over a lambda grid")
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=["sigmoid", "softplus"], required=True)
    p.add_argument("--l1", type=float, required=True, help="clean-region loss")
    p.add_argument("--l2", type=float, required=True, help="noisy-region loss")
    p.add_argument("--lambdas", required=True, help="comma list or lo:hi:count log grid")
    p.set_defaults(func=cmd_analyze_lambda)
    return parser


def _configure_logging():
    level = os.environ.get("UQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrainingDiverged as exc:
        print(f"uq: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataFormatError, OSError) as exc:
        print(f"uq: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"uq: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
