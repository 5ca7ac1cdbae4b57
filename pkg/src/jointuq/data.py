"""Datasets: synthetic generators, CSV ingestion, normalisation and folds."""

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import MissingColumnError, NonFiniteError, NonNumericCellError, RaggedRowError, ShapeError

# Noisy strips of the sharp-interface data set.
DEFAULT_STRIPS = ((0.2, 0.3), (0.6, 0.7))
DEFAULT_STRIP_SIGMAS = (1.0, 5.0)
STRIP_MEAN = -2.0


def clean_mean(x):
    return 3.0 * x + np.sin(2.0 * np.pi * x)


def smooth_std(x):
    return 1.0 + np.sin(4.0 * np.pi * x)


@dataclass
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    feature_names: Optional[List[str]] = None
    target_name: Optional[str] = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim == 1:
            self.inputs = self.inputs.reshape(-1, 1)
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1)
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ShapeError("inputs and targets differ in sample count")
        if self.inputs.shape[0] < 1:
            raise ShapeError("dataset must hold at least one sample")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise NonFiniteError("dataset contains non-finite values")

    def __len__(self):
        return self.targets.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.inputs[idx], self.targets[idx], self.feature_names, self.target_name)


def gen_smooth(n: int, seed: int) -> Dataset:
    """``x ~ U[0, 1]``, ``y ~ Normal(3x + sin 2 pi x, (1 + sin 4 pi x)^2)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=n)
    y = clean_mean(x) + smooth_std(x) * rng.standard_normal(n)
    return Dataset(x.reshape(-1, 1), y, ["x"], "y")


@dataclass(frozen=True)
class SharpLayout:
    strips: Tuple[Tuple[float, float], ...] = DEFAULT_STRIPS
    sigmas: Tuple[float, ...] = DEFAULT_STRIP_SIGMAS
    strip_mean: float = STRIP_MEAN

    def region_bounds(self) -> List[float]:
        """Edges splitting [0, 1] into alternating clean/noisy regions."""
        edges = [0.0]
        for a, b in self.strips:
            edges.extend((a, b))
        edges.append(1.0)
        return edges

    def in_strip(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        mask = np.zeros(x.shape, dtype=bool)
        for a, b in self.strips:
            mask |= (x >= a) & (x <= b)
        return mask

    def clean_intervals(self) -> List[Tuple[float, float]]:
        edges = self.region_bounds()
        return [(edges[i], edges[i + 1]) for i in range(0, len(edges) - 1, 2)]


def gen_sharp(n: int, noisy_fraction: float, seed: int, layout: SharpLayout = SharpLayout()) -> Dataset:
    """Noiseless ``3x + sin 2 pi x`` outside the strips, ``Normal(-2, sigma^2)`` inside.

    Each sample is noisy with probability ``noisy_fraction``; noisy samples
    are then split evenly between the strips (x uniform within a strip),
    clean samples are uniform on the complement of the strips.
    """
    if not 0.0 < noisy_fraction < 1.0:
        raise ValueError("noisy_fraction must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    n_noisy = int(rng.binomial(n, noisy_fraction))
    n_clean = n - n_noisy
    n_strips = len(layout.strips)
    per_strip = [n_noisy // n_strips + (1 if i < n_noisy % n_strips else 0) for i in range(n_strips)]

    xs, ys = [], []
    for (a, b), sigma, count in zip(layout.strips, layout.sigmas, per_strip):
        x = rng.uniform(a, b, size=count)
        xs.append(x)
        ys.append(layout.strip_mean + sigma * rng.standard_normal(count))

    intervals = layout.clean_intervals()
    lengths = np.array([b - a for a, b in intervals])
    u = rng.uniform(0.0, lengths.sum(), size=n_clean)
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    which = np.searchsorted(np.cumsum(lengths), u, side="right").clip(max=len(intervals) - 1)
    x_clean = np.array([a for a, _ in intervals])[which] + (u - starts[which])
    xs.append(x_clean)
    ys.append(clean_mean(x_clean))

    x = np.concatenate(xs)
    y = np.concatenate(ys)
    order = rng.permutation(n)
    return Dataset(x[order].reshape(-1, 1), y[order], ["x"], "y")


def load_csv(path, target_column=-1) -> Dataset:
    """Numeric CSV with a header row; ``target_column`` is a name or an index.

    Remaining columns become features in file order.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise RaggedRowError("empty file", row=1)
    header = [h.strip() for h in rows[0]]
    width = len(header)
    if isinstance(target_column, str):
        if target_column in header:
            t_idx = header.index(target_column)
        else:
            try:
                t_idx = int(target_column)
            except ValueError:
                raise MissingColumnError("target column not found", column=target_column) from None
    else:
        t_idx = int(target_column)
    if not -width <= t_idx < width:
        raise MissingColumnError("target column index out of range", column=target_column)
    t_idx %= width

    values = np.empty((len(rows) - 1, width), dtype=np.float64)
    n = 0
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != width:
            raise RaggedRowError(f"expected {width} cells, found {len(row)}", row=line_no)
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCellError(f"non-numeric cell {cell!r}", row=line_no, column=header[j]) from None
            if not math.isfinite(v):
                raise NonNumericCellError(f"non-finite cell {cell!r}", row=line_no, column=header[j])
            values[n, j] = v
        n += 1
    values = values[:n]
    if n == 0:
        raise RaggedRowError("no data rows", row=2)
    feat = [j for j in range(width) if j != t_idx]
    return Dataset(values[:, feat], values[:, t_idx], [header[j] for j in feat], header[t_idx])


def save_csv(data: Dataset, path) -> None:
    names = data.feature_names or [f"x{i}" for i in range(data.n_features)]
    target = data.target_name or "y"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join([*names, target]) + "\n")
        for row, y in zip(data.inputs, data.targets):
            fh.write(",".join(repr(float(v)) for v in (*row, y)) + "\n")


@dataclass
class Normalizer:
    input_mean: np.ndarray
    input_std: np.ndarray
    target_mean: float = 0.0
    target_std: float = 1.0

    @classmethod
    def identity(cls, n_features: int) -> "Normalizer":
        return cls(np.zeros(n_features), np.ones(n_features), 0.0, 1.0)

    def apply_inputs(self, x):
        return (np.asarray(x, dtype=np.float64) - self.input_mean) / self.input_std

    def invert_inputs(self, x):
        return np.asarray(x, dtype=np.float64) * self.input_std + self.input_mean

    def apply_targets(self, y):
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def invert_targets(self, y):
        return np.asarray(y, dtype=np.float64) * self.target_std + self.target_mean

    def apply(self, data: Dataset) -> Dataset:
        return Dataset(self.apply_inputs(data.inputs), self.apply_targets(data.targets),
                       data.feature_names, data.target_name)

    def invert(self, data: Dataset) -> Dataset:
        return Dataset(self.invert_inputs(data.inputs), self.invert_targets(data.targets),
                       data.feature_names, data.target_name)

    def to_dict(self):
        return {
            "input_mean": [float(v) for v in self.input_mean],
            "input_std": [float(v) for v in self.input_std],
            "target_mean": float(self.target_mean),
            "target_std": float(self.target_std),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["input_mean"], dtype=np.float64), np.asarray(d["input_std"], dtype=np.float64),
                   float(d["target_mean"]), float(d["target_std"]))


def _pop_std(a, axis=0):
    std = np.std(a, axis=axis)
    return np.where(std > 0, std, 1.0)


def fit_normalizer(data: Dataset, train_indices=None) -> Normalizer:
    """Population mean/std of the training subset; constant columns get std 1."""
    if train_indices is None:
        train_indices = np.arange(len(data))
    idx = np.asarray(train_indices, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("train_indices must be non-empty")
    x = data.inputs[idx]
    y = data.targets[idx]
    return Normalizer(x.mean(axis=0), _pop_std(x), float(y.mean()), float(_pop_std(y)))


@dataclass
class FoldPlan:
    folds: List[Tuple[np.ndarray, np.ndarray]]
    fold_count: int
    train_fraction: float
    seed: int
    n: int = field(default=0)

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)


def make_folds(n: int, fold_count: int, train_fraction: float, seed: int) -> FoldPlan:
    """Independent random train/test splits (not a partition across folds)."""
    n_train = int(round(train_fraction * n))
    if not 1 <= n_train <= n - 1:
        raise ValueError(f"degenerate split: {n_train} train samples out of {n}")
    if fold_count < 1:
        raise ValueError("fold_count must be >= 1")
    rng = np.random.default_rng(seed)
    folds = []
    for _ in range(fold_count):
        perm = rng.permutation(n)
        folds.append((np.sort(perm[:n_train]), np.sort(perm[n_train:])))
    return FoldPlan(folds, fold_count, train_fraction, seed, n)


def strip_counts(data: Dataset, layout: SharpLayout = SharpLayout()) -> Sequence[int]:
    x = data.inputs[:, 0]
    return [int(np.sum((x >= a) & (x <= b))) for a, b in layout.strips]
