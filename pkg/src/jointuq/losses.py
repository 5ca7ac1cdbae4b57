"""Regressor losses, quantifier heads and the joint loss.

The quantifier emits a pre-activation ``xi``; its output ``z = Z(xi)`` is
either a sigmoid (``z`` in (0, 1)) or a softplus (``z`` in (0, inf)). Each
head fixes the pair ``(f, g)``:

    sigmoid:   f(z) = -ln(1 - z) = softplus(xi),  g(z) = -ln z = softplus(-xi)
    softplus:  f(z) = z,                          g(z) = -ln z

and the per-sample joint loss is ``L * f(z) + lam * g(z)`` with ``L`` the
regressor loss. Everything is evaluated in xi-space so that saturated
heads never produce ``log(0)``.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import NonFiniteError
from .kernels import sigmoid, softplus


class HeadVariant(str, Enum):
    SIGMOID = "sigmoid"
    SOFTPLUS = "softplus"

    @property
    def code(self) -> int:
        return kernels.HEAD_SIGMOID if self is HeadVariant.SIGMOID else kernels.HEAD_SOFTPLUS


class LossKind(str, Enum):
    MSE = "mse"
    MAE = "mae"

    @property
    def code(self) -> int:
        return kernels.LOSS_MSE if self is LossKind.MSE else kernels.LOSS_MAE


@dataclass(frozen=True)
class JointLossSpec:
    variant: HeadVariant
    lam: float
    regressor_loss: LossKind = LossKind.MSE

    def __post_init__(self):
        object.__setattr__(self, "variant", HeadVariant(self.variant))
        object.__setattr__(self, "regressor_loss", LossKind(self.regressor_loss))
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be positive and finite, got {self.lam}")

    def to_dict(self):
        return {"variant": self.variant.value, "lambda": self.lam, "regressor_loss": self.regressor_loss.value}

    @classmethod
    def from_dict(cls, d):
        return cls(HeadVariant(d["variant"]), float(d["lambda"]), LossKind(d["regressor_loss"]))


@dataclass(frozen=True)
class PerSampleLoss:
    value: float
    d_dL: float
    d_dxi: float


@dataclass(frozen=True)
class HeadValues:
    z: float
    f: float
    g: float
    df_dxi: float
    dg_dxi: float


def regressor_loss(kind, y, y_r):
    """``(value, d value / d y_r)``; the MAE subgradient at a tie is 0."""
    kind = LossKind(kind)
    r = y - y_r
    if kind is LossKind.MSE:
        return r * r, -2.0 * r
    return abs(r), -float(np.sign(r))


def head_eval(variant, xi: float) -> HeadValues:
    variant = HeadVariant(variant)
    if not math.isfinite(xi):
        raise NonFiniteError("xi must be finite")
    sp_pos = float(softplus(xi))
    s_pos = float(sigmoid(xi))
    if variant is HeadVariant.SIGMOID:
        return HeadValues(
            z=s_pos,
            f=sp_pos,
            g=float(softplus(-xi)),
            df_dxi=s_pos,
            dg_dxi=-float(sigmoid(-xi)),
        )
    return HeadValues(z=sp_pos, f=sp_pos, g=-math.log(sp_pos), df_dxi=s_pos, dg_dxi=-s_pos / sp_pos)


def head_arrays(variant, xi):
    """Vectorised ``(z, f, g, df/dxi, dg/dxi)`` for an array of pre-activations."""
    variant = HeadVariant(variant)
    xi = np.asarray(xi, dtype=np.float64)
    sp = softplus(xi)
    s = sigmoid(xi)
    if variant is HeadVariant.SIGMOID:
        return s, sp, softplus(-xi), s, -sigmoid(-xi)
    return sp, sp, -np.log(sp), s, -s / sp


def z_of_xi(variant, xi):
    variant = HeadVariant(variant)
    return sigmoid(xi) if variant is HeadVariant.SIGMOID else softplus(xi)


def joint_loss_sample(spec: JointLossSpec, big_l: float, xi: float) -> PerSampleLoss:
    """Joint loss ``L*f + lam*g`` at one sample, with partials in L and xi.

    ``L == 0`` is accepted; the loss then reduces to ``lam * g``.
    """
    if not (math.isfinite(big_l) and math.isfinite(xi)):
        raise NonFiniteError("joint loss inputs must be finite")
    if big_l < 0:
        raise ValueError("regressor loss must be non-negative")
    h = head_eval(spec.variant, xi)
    return PerSampleLoss(
        value=big_l * h.f + spec.lam * h.g,
        d_dL=h.f,
        d_dxi=big_l * h.df_dxi + spec.lam * h.dg_dxi,
    )


def region_loss(variant, big_l, xi, lam):
    """Region-level loss ``L * f(Z(xi)) + lam * g(Z(xi))`` (vectorised)."""
    _, f, g, _, _ = head_arrays(variant, xi)
    return big_l * f + lam * g


def expected_loss(variant, z, lam):
    """Expected regressor loss ``-lam * g'(z) / f'(z)`` encoded by quantifier output ``z``."""
    variant = HeadVariant(variant)
    z = np.asarray(z, dtype=np.float64)
    if variant is HeadVariant.SIGMOID:
        if np.any((z <= 0) | (z >= 1)):
            raise ValueError("sigmoid head output must lie in (0, 1)")
        out = lam * (1.0 / z - 1.0)
    else:
        if np.any(z <= 0):
            raise ValueError("softplus head output must be positive")
        out = lam / z
    return out if out.ndim else float(out)


def expected_loss_from_xi(variant, xi, lam):
    """Same as :func:`expected_loss` but from the pre-activation.

    For the sigmoid head ``lam * (1/z - 1) = lam * exp(-xi)``, which stays
    accurate when ``z`` rounds to 1.
    """
    variant = HeadVariant(variant)
    xi = np.asarray(xi, dtype=np.float64)
    if variant is HeadVariant.SIGMOID:
        out = lam * np.exp(-xi)
    else:
        out = lam / softplus(xi)
    return out if out.ndim else float(out)


def gaussian_nll(y, mu, tau):
    """Negative log-density of a normal with mean ``mu`` and precision ``tau``."""
    return 0.5 * (y - mu) ** 2 * tau - 0.5 * math.log(tau) + 0.5 * math.log(2.0 * math.pi)


def laplace_nll(y, mu, tau):
    """Negative log-density of ``(tau/2) exp(-|y - mu| tau)``."""
    return abs(y - mu) * tau - math.log(tau / 2.0)


def ml_equivalence_check(y, mu, tau, kind):
    """Joint loss of the ``f=z, g=-ln z, lam=1`` head versus the matching NLL.

    Returns ``(joint, nll)`` where ``joint = L(y, mu) * tau - ln tau``. For
    MSE the identity is ``joint == 2*nll - ln(2*pi)`` (Gaussian with
    variance ``1/tau``); for MAE it is ``joint == nll - ln 2`` (Laplace).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    kind = LossKind(kind)
    big_l, _ = regressor_loss(kind, y, mu)
    joint = big_l * tau - math.log(tau)
    nll = gaussian_nll(y, mu, tau) if kind is LossKind.MSE else laplace_nll(y, mu, tau)
    return joint, nll
