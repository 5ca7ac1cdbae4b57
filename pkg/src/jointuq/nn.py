"""Dense feed-forward networks with exact reverse-mode gradients.

Networks are small fixed-topology MLPs. Weight matrices are stored as
``(out_dim, in_dim)`` arrays, so a batch ``X`` of shape ``(B, in_dim)`` maps
to ``X @ W.T + b``. All arithmetic is float64.

Randomness comes from numpy's ``Generator`` with the PCG64 bit generator,
seeded explicitly everywhere; nothing in this module touches global state.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import kernels
from .errors import NonFiniteError, ShapeError, StaleCacheError

ACTIVATIONS = {
    "linear": kernels.LINEAR,
    "tanh": kernels.TANH,
    "relu": kernels.RELU,
    "sigmoid": kernels.SIGMOID,
    "softplus": kernels.SOFTPLUS,
}


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "linear"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ShapeError(f"layer dims must be positive, got {self.in_dim}->{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    def to_dict(self):
        return {"in_dim": self.in_dim, "out_dim": self.out_dim, "activation": self.activation}


def dense_stack(in_dim: int, hidden: Sequence[int], activation: str, out_activation: str, out_dim: int = 1):
    """Layer specs for ``in_dim -> hidden... -> out_dim``."""
    dims = [in_dim, *hidden, out_dim]
    specs = []
    for i in range(len(dims) - 1):
        act = out_activation if i == len(dims) - 2 else activation
        specs.append(LayerSpec(dims[i], dims[i + 1], act))
    return specs


@dataclass
class Mlp:
    layers: List[LayerSpec]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    rng_seed: int = 0
    version: int = 0

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def output_activation(self) -> str:
        return self.layers[-1].activation

    @property
    def act_codes(self):
        return [ACTIVATIONS[spec.activation] for spec in self.layers]

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> List[np.ndarray]:
        """Parameter arrays interleaved as ``[W0, b0, W1, b1, ...]`` (views, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "Mlp":
        return Mlp(
            list(self.layers),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.rng_seed,
            self.version,
        )

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])


@dataclass
class ForwardCache:
    pres: list
    posts: list
    masks: list
    xi: Optional[np.ndarray]
    net_id: int
    version: int
    squeeze: bool


@dataclass
class ParamGrads:
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def arrays(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def scaled(self, factor: float) -> "ParamGrads":
        return ParamGrads([w * factor for w in self.weights], [b * factor for b in self.biases])


@dataclass
class OptState:
    velocity: List[np.ndarray]
    learning_rate: float
    momentum: float = 0.9
    dropout_rate: float = 0.0
    steps: int = field(default=0)

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")


def mlp_new(specs: Sequence[LayerSpec], seed: int) -> Mlp:
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    specs = list(specs)
    if not specs:
        raise ShapeError("at least one layer is required")
    for prev, nxt in zip(specs, specs[1:]):
        if prev.out_dim != nxt.in_dim:
            raise ShapeError(f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for spec in specs:
        s = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        weights.append(np.ascontiguousarray(rng.uniform(-s, s, size=(spec.out_dim, spec.in_dim))))
        biases.append(np.zeros(spec.out_dim))
    return Mlp(specs, weights, biases, int(seed))


def dropout_masks(net: Mlp, batch: int, rate: float, rng: np.random.Generator):
    """Inverted-dropout masks for every hidden layer (never the output layer)."""
    masks = [None] * len(net.layers)
    if rate <= 0.0:
        return masks
    keep = 1.0 - rate
    for i, spec in enumerate(net.layers[:-1]):
        masks[i] = (rng.random((batch, spec.out_dim)) < keep) * (1.0 / keep)
    return masks


def forward(net: Mlp, x, mode: str = "eval", dropout_rate: float = 0.0,
            rng: Optional[np.random.Generator] = None, masks=None):
    """Forward pass on a single input vector or a ``(B, in_dim)`` batch.

    In ``"train"`` mode with ``dropout_rate > 0`` hidden activations are
    dropped and rescaled by ``1/(1 - rate)``; ``"eval"`` never drops.
    Explicit ``masks`` override mask sampling.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    xb = x.reshape(1, -1) if squeeze else x
    if xb.ndim != 2 or xb.shape[1] != net.in_dim:
        raise ShapeError(f"expected input width {net.in_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(xb)):
        raise NonFiniteError("non-finite network input")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if masks is None:
        if mode == "train" and dropout_rate > 0.0:
            if rng is None:
                raise ValueError("dropout in train mode needs an rng")
            masks = dropout_masks(net, xb.shape[0], dropout_rate, rng)
        else:
            masks = [None] * len(net.layers)
    pres, posts = kernels.forward_pass(net.weights, net.biases, net.act_codes, np.ascontiguousarray(xb), masks)
    xi = pres[-1][:, 0] if net.output_activation in ("sigmoid", "softplus") else None
    out = posts[-1]
    cache = ForwardCache(pres, posts, masks, xi, id(net), net.version, squeeze)
    return (out[0] if squeeze else out), cache


def predict_batch(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Eval-mode outputs for a batch, without keeping a cache."""
    pres, posts = kernels.forward_pass(
        net.weights, net.biases, net.act_codes, np.ascontiguousarray(x, dtype=np.float64),
        [None] * len(net.layers))
    return posts[-1]


def predict_preactivation(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Eval-mode final pre-activations (xi for quantifier nets), shape ``(B,)``."""
    pres, _ = kernels.forward_pass(
        net.weights, net.biases, net.act_codes, np.ascontiguousarray(x, dtype=np.float64),
        [None] * len(net.layers))
    return pres[-1][:, 0]


def backward(net: Mlp, cache: ForwardCache, out_grad, at_preactivation: bool = False) -> ParamGrads:
    """Exact gradient of ``sum(output * out_grad)`` w.r.t. every parameter.

    ``at_preactivation=True`` treats ``out_grad`` as the gradient with
    respect to the last layer's pre-activation (xi), bypassing the output
    nonlinearity.
    """
    if cache.net_id != id(net) or cache.version != net.version:
        raise StaleCacheError("forward cache does not belong to the current network state")
    g = np.asarray(out_grad, dtype=np.float64)
    if cache.squeeze:
        g = g.reshape(1, -1)
    elif g.ndim == 1:
        g = g.reshape(-1, 1)
    if g.shape != cache.pres[-1].shape:
        raise ShapeError(f"out_grad shape {g.shape} does not match output {cache.pres[-1].shape}")
    dw, db = kernels.backward_pass(
        net.weights, net.act_codes, cache.pres, cache.posts, cache.masks,
        np.ascontiguousarray(g), at_preactivation)
    return ParamGrads(list(dw), list(db))


def opt_new(net: Mlp, learning_rate: float, momentum: float = 0.9, dropout_rate: float = 0.0) -> OptState:
    return OptState([np.zeros_like(p) for p in net.params()], learning_rate, momentum, dropout_rate)


def sgd_step(net: Mlp, grads: ParamGrads, opt: OptState):
    """One Nesterov-momentum step, in place.

    The stored weights are the lookahead point ``theta + m*v``, so gradients
    computed at the current weights are exactly the lookahead gradients:

        v <- m*v - lr*g
        w <- w + m*v - lr*g

    With ``momentum == 0`` this is plain SGD. Returns ``(net, opt)``.
    """
    arrays = grads.arrays()
    params = net.params()
    if len(arrays) != len(params):
        raise ShapeError("gradient/parameter count mismatch")
    for p, g in zip(params, arrays):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient")
    kernels.nesterov_update(params, arrays, opt.velocity, float(opt.learning_rate), float(opt.momentum))
    opt.steps += 1
    net.version += 1
    return net, opt
