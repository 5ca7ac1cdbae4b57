"""Joint training of a regressor and an uncertainty quantifier.

Both networks see the same minibatch and take one Nesterov step each per
minibatch. The regressor receives ``f(z) * dL/dy_r``; the quantifier
receives ``dJ/dxi`` at its final pre-activation only, so no gradient flows
from the quantifier into the regressor.

Training runs in normalised space. Predictions are mapped back to target
units: expected MSE scales with ``target_std**2``, expected MAE with
``target_std``.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from . import kernels
from .data import Dataset, Normalizer, fit_normalizer
from .errors import ShapeError, TrainingDiverged
from .losses import HeadVariant, JointLossSpec, LossKind, expected_loss_from_xi, z_of_xi
from .nn import Mlp, dense_stack, dropout_masks, mlp_new, predict_batch, predict_preactivation

log = logging.getLogger(__name__)

METHODS = ("joint", "ml", "standard", "posthoc")


@dataclass
class TrainConfig:
    loss_spec: JointLossSpec
    epochs: int
    minibatch: int
    learning_rate: float
    momentum: float = 0.9
    dropout: float = 0.0
    seed: int = 0
    regressor_hidden: Tuple[int, ...] = (10, 10)
    quantifier_hidden: Tuple[int, ...] = (10, 10)
    activation: str = "tanh"
    normalize: bool = True
    method: str = "joint"

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.minibatch < 1:
            raise ValueError("minibatch must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        self.regressor_hidden = tuple(int(h) for h in self.regressor_hidden)
        self.quantifier_hidden = tuple(int(h) for h in self.quantifier_hidden)

    def regressor_arch(self, n_in: int):
        return dense_stack(n_in, self.regressor_hidden, self.activation, "linear")

    def quantifier_arch(self, n_in: int):
        return dense_stack(n_in, self.quantifier_hidden, self.activation, self.loss_spec.variant.value)

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=int(seed))

    def to_dict(self):
        return {
            "loss": self.loss_spec.to_dict(),
            "epochs": self.epochs,
            "minibatch": self.minibatch,
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "dropout": self.dropout,
            "seed": self.seed,
            "regressor_hidden": list(self.regressor_hidden),
            "quantifier_hidden": list(self.quantifier_hidden),
            "activation": self.activation,
            "normalize": self.normalize,
            "method": self.method,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        spec = JointLossSpec.from_dict(d.pop("loss"))
        return cls(loss_spec=spec, **d)


def _seeds(seed: int):
    """Independent streams: regressor init, quantifier init, shuffling, dropout."""
    children = np.random.SeedSequence(int(seed)).spawn(4)
    r_init, q_init = (int(c.generate_state(1, np.uint64)[0]) for c in children[:2])
    return r_init, q_init, np.random.default_rng(children[2]), np.random.default_rng(children[3])


@dataclass
class TrainedRegressor:
    regressor: Mlp
    normalizer: Normalizer
    loss_kind: LossKind
    history: List[float] = field(default_factory=list)

    def predict_batch(self, x) -> np.ndarray:
        xn = self.normalizer.apply_inputs(np.asarray(x, dtype=np.float64).reshape(-1, self.regressor.in_dim))
        return self.normalizer.invert_targets(predict_batch(self.regressor, xn)[:, 0])


@dataclass
class TrainedPair:
    regressor: Mlp
    quantifier: Mlp
    loss_spec: JointLossSpec
    normalizer: Normalizer
    history: List[float] = field(default_factory=list)
    method: str = "joint"

    @property
    def loss_kind(self) -> LossKind:
        return self.loss_spec.regressor_loss

    def unit_scale(self) -> float:
        s = self.normalizer.target_std
        return s * s if self.loss_kind is LossKind.MSE else s

    def predict_batch(self, x):
        """``(y_r, z, expected_loss)`` arrays in original units for raw inputs ``x``."""
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.regressor.in_dim)
        xn = self.normalizer.apply_inputs(x)
        y_r = self.normalizer.invert_targets(predict_batch(self.regressor, xn)[:, 0])
        xi = predict_preactivation(self.quantifier, xn)
        z = z_of_xi(self.loss_spec.variant, xi)
        el = expected_loss_from_xi(self.loss_spec.variant, xi, self.loss_spec.lam) * self.unit_scale()
        return y_r, np.asarray(z), np.asarray(el)


def predict(pair: TrainedPair, x) -> Tuple[float, float, float]:
    """``(y_r, z, expected_loss)`` for one raw input vector."""
    y_r, z, el = pair.predict_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))
    return float(y_r[0]), float(z[0]), float(el[0])


def _prepare(data: Dataset, cfg: TrainConfig, normalizer: Optional[Normalizer]):
    if normalizer is None:
        normalizer = fit_normalizer(data) if cfg.normalize else Normalizer.identity(data.n_features)
    x = np.ascontiguousarray(normalizer.apply_inputs(data.inputs))
    y = np.ascontiguousarray(normalizer.apply_targets(data.targets))
    return normalizer, x, y


def _interleave(dw, db):
    out = []
    for w, b in zip(dw, db):
        out.append(w)
        out.append(b)
    return out


class _Stepper:
    """Holds a network and its optimiser buffers for the training loops."""

    def __init__(self, net: Mlp, cfg: TrainConfig):
        self.net = net
        self.acts = net.act_codes
        self.params = net.params()
        self.velocity = [np.zeros_like(p) for p in self.params]
        self.lr = float(cfg.learning_rate)
        self.momentum = float(cfg.momentum)

    def forward(self, xb, masks):
        return kernels.forward_pass(self.net.weights, self.net.biases, self.acts, xb, masks)

    def step(self, pres, posts, masks, grad, at_preactivation):
        dw, db = kernels.backward_pass(self.net.weights, self.acts, pres, posts, masks, grad, at_preactivation)
        kernels.nesterov_update(self.params, _interleave(dw, db), self.velocity, self.lr, self.momentum)
        self.net.version += 1


def _finish_epoch(epoch: int, total: float, n: int, history: List[float]):
    mean = total / n
    if not np.isfinite(mean):
        raise TrainingDiverged(epoch, mean)
    history.append(float(mean))
    log.debug("epoch %d mean loss %.6g", epoch, mean)


def train_pair(data: Dataset, cfg: TrainConfig, normalizer: Optional[Normalizer] = None) -> TrainedPair:
    """Train regressor and quantifier simultaneously on the joint loss.

    ``normalizer`` defaults to one fitted on ``data`` (or the identity when
    ``cfg.normalize`` is false). History holds the mean per-sample joint
    loss of each epoch, measured on the training minibatches.
    """
    normalizer, x, y = _prepare(data, cfg, normalizer)
    n = len(y)
    spec = cfg.loss_spec
    r_seed, q_seed, shuffle_rng, drop_rng = _seeds(cfg.seed)
    reg = _Stepper(mlp_new(cfg.regressor_arch(x.shape[1]), r_seed), cfg)
    qnt = _Stepper(mlp_new(cfg.quantifier_arch(x.shape[1]), q_seed), cfg)
    head, kind, lam = spec.variant.code, spec.regressor_loss.code, float(spec.lam)
    history: List[float] = []
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            perm = shuffle_rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.minibatch):
                idx = perm[start:start + cfg.minibatch]
                xb = x[idx]
                yb = y[idx]
                b = len(idx)
                masks_r = dropout_masks(reg.net, b, cfg.dropout, drop_rng)
                masks_q = dropout_masks(qnt.net, b, cfg.dropout, drop_rng)
                pres_r, posts_r = reg.forward(xb, masks_r)
                pres_q, posts_q = qnt.forward(xb, masks_q)
                value, d_yr, d_xi, _ = kernels.joint_loss_batch(
                    head, kind, yb, pres_r[-1][:, 0], pres_q[-1][:, 0], lam)
                total += value.sum()
                reg.step(pres_r, posts_r, masks_r, (d_yr / b).reshape(-1, 1), False)
                qnt.step(pres_q, posts_q, masks_q, (d_xi / b).reshape(-1, 1), True)
            _finish_epoch(epoch, total, n, history)
    return TrainedPair(reg.net, qnt.net, spec, normalizer, history, cfg.method)


def train_standard(data: Dataset, cfg: TrainConfig, normalizer: Optional[Normalizer] = None) -> TrainedRegressor:
    """Regressor alone on the mean regressor loss, same optimiser and seeding as :func:`train_pair`."""
    normalizer, x, y = _prepare(data, cfg, normalizer)
    n = len(y)
    kind = cfg.loss_spec.regressor_loss
    r_seed, _, shuffle_rng, drop_rng = _seeds(cfg.seed)
    reg = _Stepper(mlp_new(cfg.regressor_arch(x.shape[1]), r_seed), cfg)
    history: List[float] = []
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            perm = shuffle_rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.minibatch):
                idx = perm[start:start + cfg.minibatch]
                xb = x[idx]
                b = len(idx)
                masks = dropout_masks(reg.net, b, cfg.dropout, drop_rng)
                pres, posts = reg.forward(xb, masks)
                value, grad = kernels.regressor_loss_batch(kind.code, y[idx], pres[-1][:, 0])
                total += value.sum()
                reg.step(pres, posts, masks, (grad / b).reshape(-1, 1), False)
            _finish_epoch(epoch, total, n, history)
    return TrainedRegressor(reg.net, normalizer, kind, history)


def train_quantifier_posthoc(frozen: TrainedRegressor, data: Dataset, cfg: TrainConfig) -> TrainedPair:
    """Fit only a quantifier against a fixed regressor's per-sample losses.

    The regressor's own normaliser is reused; its weights are never
    touched. ``cfg.loss_spec.regressor_loss`` chooses which error the
    quantifier learns to predict.
    """
    normalizer = frozen.normalizer
    x = np.ascontiguousarray(normalizer.apply_inputs(data.inputs))
    y = np.ascontiguousarray(normalizer.apply_targets(data.targets))
    if x.shape[1] != frozen.regressor.in_dim:
        raise ShapeError("data width does not match the frozen regressor")
    y_r = predict_batch(frozen.regressor, x)[:, 0]
    n = len(y)
    spec = cfg.loss_spec
    _, q_seed, shuffle_rng, drop_rng = _seeds(cfg.seed)
    qnt = _Stepper(mlp_new(cfg.quantifier_arch(x.shape[1]), q_seed), cfg)
    head, kind, lam = spec.variant.code, spec.regressor_loss.code, float(spec.lam)
    history: List[float] = []
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            perm = shuffle_rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.minibatch):
                idx = perm[start:start + cfg.minibatch]
                b = len(idx)
                masks = dropout_masks(qnt.net, b, cfg.dropout, drop_rng)
                pres, posts = qnt.forward(x[idx], masks)
                value, _, d_xi, _ = kernels.joint_loss_batch(head, kind, y[idx], y_r[idx], pres[-1][:, 0], lam)
                total += value.sum()
                qnt.step(pres, posts, masks, (d_xi / b).reshape(-1, 1), True)
            _finish_epoch(epoch, total, n, history)
    return TrainedPair(frozen.regressor, qnt.net, spec, normalizer, history, "posthoc")


def joint_objective(regressor: Mlp, quantifier: Mlp, spec: JointLossSpec, x, y):
    """Mean joint loss on ``(x, y)`` in eval mode, with exact parameter gradients.

    ``x`` and ``y`` are taken as already normalised. Returns
    ``(loss, grads_regressor, grads_quantifier)``.
    """
    from .nn import backward, forward

    x = np.asarray(x, dtype=np.float64).reshape(-1, regressor.in_dim)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    out_r, cache_r = forward(regressor, x)
    _, cache_q = forward(quantifier, x)
    value, d_yr, d_xi, _ = kernels.joint_loss_batch(
        spec.variant.code, spec.regressor_loss.code, y, out_r[:, 0], cache_q.xi, float(spec.lam))
    n = len(y)
    g_r = backward(regressor, cache_r, (d_yr / n).reshape(-1, 1))
    g_q = backward(quantifier, cache_q, (d_xi / n).reshape(-1, 1), at_preactivation=True)
    return float(value.mean()), g_r, g_q


def mean_joint_loss(pair: TrainedPair, data: Dataset) -> float:
    """Eval-mode mean joint loss in the pair's normalised space."""
    x = pair.normalizer.apply_inputs(data.inputs)
    y = pair.normalizer.apply_targets(data.targets)
    y_r = predict_batch(pair.regressor, x)[:, 0]
    xi = predict_preactivation(pair.quantifier, x)
    spec = pair.loss_spec
    value, _, _, _ = kernels.joint_loss_batch(spec.variant.code, spec.regressor_loss.code, y, y_r, xi, float(spec.lam))
    return float(value.mean())


# Boston rows of the hyperparameter tables; the ML method is the softplus head with lambda = 1.
_ML_DEFAULTS = {
    LossKind.MSE: {"learning_rate": 4e-5, "dropout": 0.4, "epochs": 500},
    LossKind.MAE: {"learning_rate": 3e-5, "dropout": 0.4, "epochs": 600},
}


def ml_preset(kind, **overrides) -> TrainConfig:
    """Maximum-likelihood baseline: Gaussian (MSE) or Laplace (MAE) likelihood.

    Equivalent to the joint loss with ``f(z) = z``, ``g(z) = -ln z`` and
    ``lambda = 1``, i.e. the softplus head.
    """
    kind = LossKind(kind)
    params = {
        "loss_spec": JointLossSpec(HeadVariant.SOFTPLUS, 1.0, kind),
        "minibatch": 5,
        "momentum": 0.9,
        "regressor_hidden": (50,),
        "quantifier_hidden": (50,),
        "activation": "relu",
        "method": "ml",
        **_ML_DEFAULTS[kind],
    }
    params.update(overrides)
    return TrainConfig(**params)
