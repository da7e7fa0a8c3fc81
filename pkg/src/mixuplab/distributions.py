"""Beta sampling and the closed-form moments of the mixed-lambda distribution.

Mixup draws ``lam ~ Beta(alpha, beta)``. After the conjugacy rewrite of the
Mixup loss the regularizers are weighted by moments of the two-component
mixture

    (alpha / (alpha + beta)) Beta(alpha + 1, beta)
        + (beta / (alpha + beta)) Beta(beta + 1, alpha)

which is represented here by :class:`LambdaMixture`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteMoment


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"Beta shapes must be positive, got ({self.alpha}, {self.beta})")
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("Beta shapes must be finite")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def variance(self) -> float:
        s = self.alpha + self.beta
        return self.alpha * self.beta / (s * s * (s + 1.0))


@dataclass(frozen=True)
class LambdaMixture:
    base: BetaParams
    component_a: BetaParams
    component_b: BetaParams
    weight_a: float

    @property
    def weight_b(self) -> float:
        return 1.0 - self.weight_a


def as_beta(params) -> BetaParams:
    if isinstance(params, BetaParams):
        return params
    alpha, beta = params
    return BetaParams(float(alpha), float(beta))


def beta_moment(a: float, b: float, k: float, m: float) -> float:
    """E[lam**k * (1 - lam)**m] for lam ~ Beta(a, b), evaluated in log-Gamma space.

    Returns ``inf`` when the integral diverges (a + k <= 0 or b + m <= 0).
    """
    if a + k <= 0 or b + m <= 0:
        return math.inf
    log_val = (
        math.lgamma(a + k) + math.lgamma(b + m) - math.lgamma(a + b + k + m)
        - math.lgamma(a) - math.lgamma(b) + math.lgamma(a + b)
    )
    return math.exp(log_val)


def _gamma_ratio(alpha, beta, rng: np.random.Generator, size=None):
    x = rng.standard_gamma(alpha, size=size)
    y = rng.standard_gamma(beta, size=size)
    return x / (x + y)


def sample_beta(params, rng: np.random.Generator, size=None):
    """Draw from Beta(alpha, beta) as X / (X + Y) with X ~ Gamma(alpha), Y ~ Gamma(beta)."""
    params = as_beta(params)
    return _gamma_ratio(params.alpha, params.beta, rng, size)


def derive_mixture(params) -> LambdaMixture:
    params = as_beta(params)
    a, b = params.alpha, params.beta
    return LambdaMixture(
        base=params,
        component_a=BetaParams(a + 1.0, b),
        component_b=BetaParams(b + 1.0, a),
        weight_a=a / (a + b),
    )


def sample_mixture(mix: LambdaMixture, rng: np.random.Generator, size=None):
    """Pick a component with probability ``weight_a`` then draw from it.

    Both components are drawn for every slot so the stream consumption does
    not depend on which component wins.
    """
    pick_a = rng.random(size) < mix.weight_a
    draw_a = sample_beta(mix.component_a, rng, size)
    draw_b = sample_beta(mix.component_b, rng, size)
    return np.where(pick_a, draw_a, draw_b) if size is not None else float(draw_a if pick_a else draw_b)


def _mixture_moment(mix: LambdaMixture, k: float, m: float) -> float:
    ca, cb = mix.component_a, mix.component_b
    return (mix.weight_a * beta_moment(ca.alpha, ca.beta, k, m)
            + mix.weight_b * beta_moment(cb.alpha, cb.beta, k, m))


def moment_one_minus_lambda(mix: LambdaMixture) -> float:
    """E[1 - lam] under the mixture; equals 2 alpha beta / ((alpha + beta)(alpha + beta + 1))."""
    return _mixture_moment(mix, 0.0, 1.0)


def moment_one_minus_lambda_sq(mix: LambdaMixture) -> float:
    return _mixture_moment(mix, 0.0, 2.0)


def moment_ratio_sq(mix: LambdaMixture) -> float:
    """E[(1 - lam)^2 / lam^2] under the mixture.

    Finite only when both components have first shape > 2, i.e. min(alpha, beta) > 1.
    """
    base = mix.base
    if min(base.alpha, base.beta) <= 1.0:
        raise NonFiniteMoment(
            f"E[(1-lam)^2/lam^2] diverges for Beta({base.alpha}, {base.beta}); need min(alpha, beta) > 1"
        )
    return _mixture_moment(mix, -2.0, 2.0)


def sample_lambda_then_bernoulli(params, rng: np.random.Generator, size: int):
    """lam ~ Beta(alpha, beta), then B | lam ~ Bernoulli(lam)."""
    params = as_beta(params)
    lam = sample_beta(params, rng, size)
    b = (rng.random(size) < lam).astype(np.int64)
    return lam, b


def sample_bernoulli_then_lambda(params, rng: np.random.Generator, size: int):
    """B ~ Bernoulli(alpha / (alpha + beta)), then lam | B ~ Beta(alpha + B, beta + 1 - B)."""
    params = as_beta(params)
    b = (rng.random(size) < params.mean).astype(np.int64)
    lam = _gamma_ratio(params.alpha + b, params.beta + 1.0 - b, rng, size)
    return lam, b
