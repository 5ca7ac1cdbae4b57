"""Closed-form analysis of the region-level joint loss.

For a region whose mean regressor loss is ``L`` and whose quantifier
pre-activation is ``xi``, the loss is

    M(L, xi) = L * f(Z(xi)) + lam * g(Z(xi)).

``M`` is convex in ``xi`` for both heads; the functions below give its
minimiser, the regressor gradient factor ``f(Z(xi_bar))``, the curvature
at the minimum (which scales quantifier gradients), and the clean/noisy
contribution ratios ``R`` (regressor) and ``Q`` (quantifier) between two
regions with losses ``L1 <= L2``.
"""

import math
from dataclasses import dataclass
from typing import Sequence

from .losses import HeadVariant


@dataclass(frozen=True)
class RegionSummary:
    L: float
    weight: float


@dataclass(frozen=True)
class ContributionReport:
    variant: HeadVariant
    lam: float
    regressor_scale_clean: float
    regressor_scale_noisy: float
    quantifier_scale_clean: float
    quantifier_scale_noisy: float
    R: float
    Q: float


def _check_positive(**kw):
    for name, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{name} must be positive and finite, got {v}")


def _softplus(x: float) -> float:
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def region_loss(variant, L: float, xi: float, lam: float) -> float:
    """``M(L, xi)`` for one region (scalar, pure ``math``)."""
    if HeadVariant(variant) is HeadVariant.SIGMOID:
        return L * _softplus(xi) + lam * _softplus(-xi)
    z = _softplus(xi)
    return L * z - lam * math.log(z)


def region_loss_grad(variant, L: float, xi: float, lam: float) -> float:
    """``dM/dxi``; for the sigmoid head this is ``(L - lam*e^-xi) / (1 + e^-xi)``."""
    if HeadVariant(variant) is HeadVariant.SIGMOID:
        return L * _sigmoid(xi) - lam * _sigmoid(-xi)
    s = _sigmoid(xi)
    return s * (L - lam / _softplus(xi))


def critical_xi(variant, L: float, lam: float) -> float:
    """Unique minimiser of ``M(L, .)``.

    sigmoid: ``ln(lam / L)``; softplus: ``ln(exp(lam / L) - 1)``.
    """
    _check_positive(L=L, lam=lam)
    r = lam / L
    if HeadVariant(variant) is HeadVariant.SIGMOID:
        return math.log(lam) - math.log(L)
    if r > 30.0:
        return r + math.log1p(-math.exp(-r))
    return math.log(math.expm1(r))


def regressor_grad_scale(variant, L: float, lam: float) -> float:
    """``f(Z(xi_bar))``, the factor multiplying regressor gradients at the quantifier optimum."""
    _check_positive(L=L, lam=lam)
    if HeadVariant(variant) is HeadVariant.SIGMOID:
        return math.log1p(lam / L)
    return lam / L


def quantifier_grad_scale(variant, L: float, lam: float) -> float:
    """Curvature ``d^2 M / d xi^2`` at ``xi_bar``.

    sigmoid: ``L*lam / (L + lam)``; softplus: ``(L^2/lam) (1 - e^{-lam/L})^2``.
    """
    _check_positive(L=L, lam=lam)
    if HeadVariant(variant) is HeadVariant.SIGMOID:
        return L * lam / (L + lam)
    return (L * L / lam) * math.expm1(-lam / L) ** 2


def contribution_ratios(variant, L1: float, L2: float, lam: float) -> ContributionReport:
    """Clean-to-noisy gradient ratios between a clean region ``L1`` and a noisy region ``L2``."""
    _check_positive(L1=L1, L2=L2, lam=lam)
    if L1 > L2:
        raise ValueError(f"expected L1 <= L2 (clean before noisy), got {L1} > {L2}")
    variant = HeadVariant(variant)
    r1 = regressor_grad_scale(variant, L1, lam)
    r2 = regressor_grad_scale(variant, L2, lam)
    q1 = quantifier_grad_scale(variant, L1, lam)
    q2 = quantifier_grad_scale(variant, L2, lam)
    if variant is HeadVariant.SIGMOID:
        R = math.log1p(lam / L1) / math.log1p(lam / L2)
        Q = L1 * (L2 + lam) / (L2 * (L1 + lam))
    else:
        R = L2 / L1
        Q = (L1 * math.expm1(-lam / L1) / (L2 * math.expm1(-lam / L2))) ** 2
    return ContributionReport(variant, lam, r1, r2, q1, q2, R, Q)


def mu0(tol: float = 1e-12) -> float:
    """Positive root of ``e^mu = 1 + 2 mu`` by bisection on [0.1, 3].

    Locates the softplus quantifier's fastest learning, ``lam = mu0 * L``.
    """
    def h(mu):
        return math.expm1(mu) - 2.0 * mu

    lo, hi = 0.1, 3.0
    while True:
        mid = 0.5 * (lo + hi)
        val = h(mid)
        if abs(val) < tol or mid in (lo, hi):
            return mid
        if val < 0:
            lo = mid
        else:
            hi = mid


def softplus_peak():
    """``(lam/L, max/L)`` of the softplus quantifier scale: ``(mu0, 4 mu0 / (1 + 2 mu0)^2)``."""
    m = mu0()
    return m, 4.0 * m / (1.0 + 2.0 * m) ** 2


def weighted_joint_loss(regions: Sequence[RegionSummary], xis: Sequence[float], variant, lam: float) -> float:
    """``sum_j C_j * M(L_j, xi_j)`` over a partition with weights ``C_j = M_j / N``."""
    if len(regions) != len(xis):
        raise ValueError("regions and xis must have equal length")
    if not regions:
        raise ValueError("at least one region is required")
    total_weight = math.fsum(r.weight for r in regions)
    if abs(total_weight - 1.0) > 1e-9:
        raise ValueError(f"region weights must sum to 1, got {total_weight}")
    return math.fsum(r.weight * region_loss(variant, r.L, xi, lam) for r, xi in zip(regions, xis))


CURVE_COLUMNS = (
    "lambda",
    "regressor_scale_clean",
    "regressor_scale_noisy",
    "quantifier_scale_clean",
    "quantifier_scale_noisy",
    "R",
    "Q",
)


def lambda_curves(variant, L1: float, L2: float, lambdas: Sequence[float]):
    """Rows of :data:`CURVE_COLUMNS` for each lambda in ``lambdas``."""
    rows = []
    for lam in lambdas:
        rep = contribution_ratios(variant, L1, L2, lam)
        rows.append({
            "lambda": lam,
            "regressor_scale_clean": rep.regressor_scale_clean,
            "regressor_scale_noisy": rep.regressor_scale_noisy,
            "quantifier_scale_clean": rep.quantifier_scale_clean,
            "quantifier_scale_noisy": rep.quantifier_scale_noisy,
            "R": rep.R,
            "Q": rep.Q,
        })
    return rows
