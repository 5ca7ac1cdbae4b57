"""Evaluation and the train/test fold protocol shared by the CLI and tests."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List

import numpy as np

from .data import Dataset, make_folds
from .ensemble import EnsembleModel, ensemble_predict
from .losses import LossKind
from .metrics import auc, mae, retention_curve, rmse
from .training import TrainConfig, TrainedPair, mean_joint_loss, train_pair, train_quantifier_posthoc, train_standard

log = logging.getLogger(__name__)

# Keys of every metrics document, in output order.
METRIC_KEYS = ("n", "method", "loss_kind", "rmse", "mae", "auc", "retention_kind", "joint_loss")
SUMMARY_KEYS = ("rmse", "mae", "auc")


def fit(data: Dataset, cfg: TrainConfig):
    """Train whatever ``cfg.method`` names; returns a pair or a bare regressor."""
    if cfg.method == "standard":
        return train_standard(data, cfg)
    if cfg.method == "posthoc":
        return train_quantifier_posthoc(train_standard(data, cfg), data, cfg)
    return train_pair(data, cfg)


def _uncertainty_and_mean(model, x):
    if isinstance(model, TrainedPair):
        y_r, _, expected = model.predict_batch(x)
        return y_r, expected
    if isinstance(model, EnsembleModel):
        pred = ensemble_predict(model, x)
        return np.asarray(pred.mu), np.asarray(pred.spread)
    return model.predict_batch(x), None


def _loss_kind(model) -> LossKind:
    return model.loss_kind


def _method(model) -> str:
    if isinstance(model, TrainedPair):
        return model.method
    if isinstance(model, EnsembleModel):
        return "ensemble-" + model.members[0].method
    return "standard"


def evaluate(model, data: Dataset):
    """``(metrics, retention_curve_or_None)`` for a pair, ensemble or bare regressor.

    The retention curve ranks samples by predicted expected loss (variance
    or expected absolute error) and measures RMSE for MSE-trained models,
    MAE for MAE-trained ones. ``joint_loss`` is the eval-mode mean joint
    loss in normalised units, available for single pairs only.
    """
    y_hat, uncertainty = _uncertainty_and_mean(model, data.inputs)
    kind = _loss_kind(model)
    curve_kind = "rmse" if kind is LossKind.MSE else "mae"
    curve = None
    if uncertainty is not None and len(data) >= 2:
        curve = retention_curve(data.targets - y_hat, uncertainty, curve_kind)
    metrics = {
        "n": len(data),
        "method": _method(model),
        "loss_kind": kind.value,
        "rmse": rmse(data.targets, y_hat),
        "mae": mae(data.targets, y_hat),
        "auc": auc(curve) if curve is not None else None,
        "retention_kind": curve_kind,
        "joint_loss": mean_joint_loss(model, data) if isinstance(model, TrainedPair) else None,
    }
    return {k: metrics[k] for k in METRIC_KEYS}, curve


def _run_fold(args):
    fold_id, data, train_idx, test_idx, cfg = args
    model = fit(data.subset(train_idx), cfg)
    metrics, _ = evaluate(model, data.subset(test_idx))
    return {"fold": fold_id, **metrics}


def summarize(rows: List[Dict[str, Any]], keys=SUMMARY_KEYS) -> Dict[str, Any]:
    """Mean and sample standard deviation per metric; ``std`` only when there are 2+ folds."""
    out: Dict[str, Any] = {"mean": {}}
    for k in keys:
        vals = [r[k] for r in rows if r.get(k) is not None]
        out["mean"][k] = math.fsum(vals) / len(vals) if vals else None
    if len(rows) > 1:
        out["std"] = {}
        for k in keys:
            vals = np.array([r[k] for r in rows if r.get(k) is not None], dtype=np.float64)
            out["std"][k] = float(np.std(vals, ddof=1)) if vals.size > 1 else None
    return out


def run_folds(data: Dataset, cfg: TrainConfig, fold_count: int, train_fraction: float, fold_seed: int,
              jobs: int = 1) -> Dict[str, Any]:
    """Train and test on each random split; normalisation is fitted on each training part only.

    Fold ``i`` trains with seed ``cfg.seed + i``.
    """
    plan = make_folds(len(data), fold_count, train_fraction, fold_seed)
    tasks = [(i, data, tr, te, cfg.with_seed(cfg.seed + i)) for i, (tr, te) in enumerate(plan)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(_run_fold, tasks))
    else:
        rows = [_run_fold(t) for t in tasks]
    for r in rows:
        log.info("fold %d: rmse %.4g mae %.4g auc %s", r["fold"], r["rmse"], r["mae"], r["auc"])
    return {"folds": rows, **summarize(rows)}
