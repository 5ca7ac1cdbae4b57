"""Ensembles of independently trained regressor/quantifier pairs.

Members are aggregated as an equal-weight mixture. For squared errors the
mixture mean and variance are exact for any member distributions; for
absolute errors each member is read as a Laplace distribution with scale
``1/tau_j`` and the mixture's expected absolute deviation from its mean is
returned.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Union

import numpy as np

from .data import Dataset, fit_normalizer
from .errors import ShapeError
from .losses import LossKind
from .training import TrainConfig, TrainedPair, train_pair

log = logging.getLogger(__name__)


class EnsembleKind(str, Enum):
    MEAN_VARIANCE = "mean_variance"
    MEAN_EAE = "mean_eae"

    @classmethod
    def for_loss(cls, kind) -> "EnsembleKind":
        return cls.MEAN_VARIANCE if LossKind(kind) is LossKind.MSE else cls.MEAN_EAE


@dataclass
class EnsemblePrediction:
    """``spread`` is the mixture variance (MeanVariance) or expected absolute error (MeanEAE).

    Fields are floats for a single point and arrays for a batch.
    """

    mu: Union[float, np.ndarray]
    spread: Union[float, np.ndarray]


@dataclass
class EnsembleModel:
    members: List[TrainedPair]
    kind: EnsembleKind

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")
        self.kind = EnsembleKind(self.kind)
        dims = {m.regressor.in_dim for m in self.members}
        kinds = {m.loss_kind for m in self.members}
        if len(dims) != 1:
            raise ShapeError("ensemble members disagree on input dimension")
        if len(kinds) != 1:
            raise ValueError("ensemble members disagree on regressor loss kind")

    def __len__(self):
        return len(self.members)

    @property
    def loss_kind(self) -> LossKind:
        return self.members[0].loss_kind


def _stack(values, name):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[0] == 0:
        raise ValueError(f"{name} must hold at least one member")
    return arr


def _out(a):
    return float(a) if np.ndim(a) == 0 else a


def aggregate_mean_variance(mus: Sequence, variances: Sequence) -> EnsemblePrediction:
    """Equal-weight mixture: ``mu = mean(mu_j)``, ``V = mean(V_j + (mu_j - mu)^2)``.

    Axis 0 indexes members; further axes (e.g. test points) broadcast.
    """
    m = _stack(mus, "mus")
    v = _stack(variances, "variances")
    if m.shape != v.shape:
        raise ShapeError("mus and variances differ in shape")
    if np.any(v < 0):
        raise ValueError("variances must be non-negative")
    mu = m.mean(axis=0)
    spread = np.mean(v + (m - mu) ** 2, axis=0)
    return EnsemblePrediction(_out(mu), _out(spread))


def aggregate_mean_eae(mus: Sequence, taus: Sequence) -> EnsemblePrediction:
    """Mixture of Laplace members: ``EAE = mean(|mu - mu_j| + exp(-|mu - mu_j| tau_j) / tau_j)``."""
    m = _stack(mus, "mus")
    t = _stack(taus, "taus")
    if m.shape != t.shape:
        raise ShapeError("mus and taus differ in shape")
    if np.any(~(t > 0)):
        raise ValueError("taus must be positive")
    mu = m.mean(axis=0)
    d = np.abs(mu - m)
    spread = np.mean(d + np.exp(-d * t) / t, axis=0)
    return EnsemblePrediction(_out(mu), _out(spread))


def _train_member(args):
    data, cfg, normalizer = args
    return train_pair(data, cfg, normalizer)


def ensemble_train(data: Dataset, cfg: TrainConfig, k: int, base_seed: int, jobs: int = 1,
                   kind=None) -> EnsembleModel:
    """Train ``k`` pairs on identical data with seeds ``base_seed .. base_seed + k - 1``.

    Members differ only through initialisation, shuffling and dropout
    streams. ``jobs > 1`` trains members in separate processes; the result
    does not depend on ``jobs``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    normalizer = fit_normalizer(data) if cfg.normalize else None
    tasks = [(data, cfg.with_seed(base_seed + j), normalizer) for j in range(k)]
    if jobs > 1 and k > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, k)) as pool:
            members = list(pool.map(_train_member, tasks))
    else:
        members = [_train_member(t) for t in tasks]
    log.info("trained %d ensemble members", k)
    kind = EnsembleKind.for_loss(cfg.loss_spec.regressor_loss) if kind is None else EnsembleKind(kind)
    return EnsembleModel(members, kind)


def member_predictions(model: EnsembleModel, x):
    """Stacked ``(y_r, expected_loss)`` of every member, shape ``(K, N)``."""
    preds = [m.predict_batch(x) for m in model.members]
    return np.stack([p[0] for p in preds]), np.stack([p[2] for p in preds])


def ensemble_predict(model: EnsembleModel, x) -> EnsemblePrediction:
    """Aggregate member predictions at ``x``.

    A single input vector yields scalar fields; a batch yields arrays.
    Member variance is the expected MSE, member ``tau`` is ``1 / expected MAE``.
    """
    x = np.asarray(x, dtype=np.float64)
    in_dim = model.members[0].regressor.in_dim
    single = x.ndim <= 1 and x.size == in_dim
    mus, expected = member_predictions(model, x.reshape(-1, in_dim))
    if model.kind is EnsembleKind.MEAN_VARIANCE:
        pred = aggregate_mean_variance(mus, expected)
    else:
        pred = aggregate_mean_eae(mus, 1.0 / expected)
    if single:
        return EnsemblePrediction(float(np.asarray(pred.mu)[0]), float(np.asarray(pred.spread)[0]))
    return EnsemblePrediction(np.atleast_1d(pred.mu), np.atleast_1d(pred.spread))
