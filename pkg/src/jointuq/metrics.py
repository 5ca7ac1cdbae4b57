"""Error measures, uncertainty-ordered retention curves and region reports."""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import ShapeError


def _pair(y, y_hat):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if y.shape != y_hat.shape:
        raise ShapeError("y and y_hat differ in length")
    if y.size == 0:
        raise ValueError("empty input")
    return y, y_hat


def rmse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def mae(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


@dataclass
class RetentionCurve:
    """``values[n]`` is the error over the samples left after dropping the ``n`` most uncertain."""

    values: np.ndarray
    metric_kind: str

    def __len__(self):
        return len(self.values)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("n,err\n")
            for n, v in enumerate(self.values):
                fh.write(f"{n},{float(v)!r}\n")


def retention_curve(residuals, uncertainties, kind: str = "rmse") -> RetentionCurve:
    """Build the retention curve from per-sample residuals ``y - y_hat``.

    Samples are sorted by decreasing uncertainty, ties broken by original
    index. For ``"rmse"`` the retained squared residuals are averaged and
    square-rooted; for ``"mae"`` absolute residuals are averaged.
    """
    kind = kind.lower()
    if kind not in ("rmse", "mae"):
        raise ValueError(f"kind must be 'rmse' or 'mae', got {kind!r}")
    r = np.asarray(residuals, dtype=np.float64).reshape(-1)
    u = np.asarray(uncertainties, dtype=np.float64).reshape(-1)
    if r.shape != u.shape:
        raise ShapeError("residuals and uncertainties differ in length")
    if r.size < 2:
        raise ValueError("retention curve needs at least two samples")
    order = np.argsort(-u, kind="stable")
    per_sample = r[order] ** 2 if kind == "rmse" else np.abs(r[order])
    n = per_sample.size
    tail_sums = np.cumsum(per_sample[::-1])[::-1]
    means = tail_sums / np.arange(n, 0, -1)
    values = np.sqrt(means) if kind == "rmse" else means
    return RetentionCurve(values, kind)


def auc(curve) -> float:
    """Trapezoid area under the curve over n = 0..N-1, normalised by N - 1."""
    values = np.asarray(curve.values if isinstance(curve, RetentionCurve) else curve, dtype=np.float64)
    if values.size < 2:
        raise ValueError("curve must have at least two points")
    return float(np.sum(values[:-1] + values[1:]) / (2.0 * (values.size - 1)))


@dataclass
class RegionStats:
    label: str
    lower: float
    upper: float
    count: int
    mean_loss: Optional[float]
    mean_expected_loss: Optional[float]


@dataclass
class RegionReport:
    regions: List[RegionStats]

    def to_dict(self):
        return {"regions": [vars(r) for r in self.regions]}


def region_report(data, pair, region_bounds: Sequence[float], labels=None) -> RegionReport:
    """Per-region report for a trained pair on one-dimensional data.

    ``pair`` is anything with ``predict_batch(x) -> (y_r, z, expected_loss)``
    and a ``loss_kind`` attribute (``"mse"`` or ``"mae"``).
    """
    if data.inputs.shape[1] != 1:
        raise ShapeError("region reports need one-dimensional inputs")
    y_r, _, expected = pair.predict_batch(data.inputs)
    r = data.targets - y_r
    kind = getattr(pair.loss_kind, "value", pair.loss_kind)
    losses = r * r if kind == "mse" else np.abs(r)
    return region_stats(data.inputs[:, 0], losses, expected, region_bounds, labels)


def region_stats(x, losses, expected_losses, region_bounds: Sequence[float], labels=None) -> RegionReport:
    """Mean regressor loss and mean predicted expected loss per interval.

    Intervals are ``[b_i, b_{i+1})`` except the last, which is closed.
    Empty regions report ``None`` for both means.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise ShapeError("region reports need one-dimensional inputs")
        x = x[:, 0]
    losses = np.asarray(losses, dtype=np.float64).reshape(-1)
    expected_losses = np.asarray(expected_losses, dtype=np.float64).reshape(-1)
    bounds = list(region_bounds)
    out = []
    for i in range(len(bounds) - 1):
        lo, hi = bounds[i], bounds[i + 1]
        last = i == len(bounds) - 2
        mask = (x >= lo) & ((x <= hi) if last else (x < hi))
        count = int(mask.sum())
        label = labels[i] if labels else f"region {i + 1}"
        out.append(RegionStats(
            label, lo, hi, count,
            float(losses[mask].mean()) if count else None,
            float(expected_losses[mask].mean()) if count else None,
        ))
    return RegionReport(out)
