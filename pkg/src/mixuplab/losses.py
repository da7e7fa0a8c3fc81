"""Standard, Mixup and second-order approximate Mixup losses.

Two Monte Carlo estimators of the Mixup loss are provided: the direct one,
which mixes pairs ``(x_i, y_i)``, ``(x_j, y_j)`` with ``lam ~ Beta(alpha, beta)``,
and the resampled one, which keeps the label ``y_i`` and perturbs ``x_i``
towards a random training input with ``lam`` drawn from the mixed-lambda
distribution. Both estimate the same number.

``approx_mixup_loss`` returns the quadratic expansion split into the
standard loss and the three regularizers R1 (first order), R2 (gradient
quadratic form) and R3 (Hessian quadratic form).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import make_rng
from .data import Dataset, is_centered, require_nonempty
from .distributions import (
    BetaParams,
    LambdaMixture,
    as_beta,
    derive_mixture,
    moment_one_minus_lambda,
    moment_one_minus_lambda_sq,
    moment_ratio_sq,
    sample_beta,
    sample_mixture,
)
from .errors import NotCentered
from .models import (
    LinearModel,
    TwoLayerNet,
    activation_pattern,
    get_loss_family,
    grad_input,
    hidden_features,
    input_hessian,
    predict,
    score_param_jacobian,
)

CHUNK = 50_000


@dataclass(frozen=True)
class MixupConfig:
    beta_params: BetaParams = BetaParams(1.0, 1.0)
    lambda_draws: int = 1
    pair_strategy: str = "sampled_pairs"
    pair_count: int = 10_000
    seed: int = 0
    # test hook: every lambda draw is replaced by this value
    fixed_lambda: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "beta_params", as_beta(self.beta_params))
        if self.lambda_draws < 1:
            raise ValueError("lambda_draws must be >= 1")
        if self.pair_strategy not in ("all_pairs", "sampled_pairs"):
            raise ValueError(f"unknown pair_strategy {self.pair_strategy!r}")
        if self.pair_strategy == "sampled_pairs" and self.pair_count < 1:
            raise ValueError("pair_count must be >= 1")

    @property
    def mixture(self) -> LambdaMixture:
        return derive_mixture(self.beta_params)


@dataclass(frozen=True)
class LossBreakdown:
    standard: float
    r1: float
    r2: float
    r3: float

    @property
    def total(self) -> float:
        return self.standard + self.r1 + self.r2 + self.r3


BREAKDOWN_COLUMNS = ["epoch", "standard", "r1", "r2", "r3", "total", "mix_mc_estimate", "mix_mc_stderr"]


def breakdown_row(epoch: int, bd: LossBreakdown, mc_estimate=float("nan"), mc_stderr=float("nan")) -> list:
    return [epoch, bd.standard, bd.r1, bd.r2, bd.r3, bd.total, mc_estimate, mc_stderr]


def pointwise_loss(lossfam, score, y):
    lossfam = get_loss_family(lossfam)
    return lossfam.h(score) - np.asarray(y, dtype=float) * score


def empirical_loss(model, lossfam, dataset: Dataset) -> float:
    require_nonempty(dataset)
    return float(np.mean(pointwise_loss(lossfam, predict(model, dataset.inputs), dataset.targets)))


def mix_points(a, b, lam):
    """lam * a + (1 - lam) * b, returning ``a`` bit-exactly wherever a == b."""
    lam = np.asarray(lam, dtype=float)
    if np.ndim(a) > np.ndim(lam):
        lam = lam.reshape(lam.shape + (1,) * (np.ndim(a) - np.ndim(lam)))
    return np.where(a == b, a, lam * a + (1.0 - lam) * b)


def _mean_and_se(samples: np.ndarray) -> tuple[float, float]:
    samples = np.asarray(samples, dtype=float)
    if np.all(samples == samples[0]):
        # summing equal values can drift by an ulp; a constant sample is its own mean
        return float(samples[0]), 0.0
    return float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(samples.size))


def _draw_lambda(cfg: MixupConfig, rng, size):
    lam = sample_beta(cfg.beta_params, rng, size)
    if cfg.fixed_lambda is not None:
        lam = np.full(size, float(cfg.fixed_lambda))
    return lam


def _mixed_loss(model, lossfam, X, y, i, j, lam):
    xm = mix_points(X[i], X[j], lam)
    ym = mix_points(y[i], y[j], lam)
    return pointwise_loss(lossfam, predict(model, xm), ym)


def mixup_loss_mc(model, lossfam, dataset: Dataset, cfg: MixupConfig) -> tuple[float, float]:
    """Monte Carlo estimate (and standard error) of the Mixup loss.

    ``all_pairs``: each of ``lambda_draws`` samples is the average over all
    n^2 ordered pairs, each pair with its own lambda.
    ``sampled_pairs``: each of ``pair_count`` samples is one uniformly drawn
    ordered pair averaged over ``lambda_draws`` lambdas.
    """
    require_nonempty(dataset)
    X, y = dataset.inputs, dataset.targets
    n = dataset.n
    rng = make_rng(cfg.seed)
    if cfg.pair_strategy == "all_pairs":
        ii, jj = np.divmod(np.arange(n * n), n)
        samples = np.empty(cfg.lambda_draws)
        for k in range(cfg.lambda_draws):
            lam = _draw_lambda(cfg, rng, n * n)
            samples[k] = _mixed_loss(model, lossfam, X, y, ii, jj, lam).mean()
        return _mean_and_se(samples)

    samples = []
    remaining = cfg.pair_count
    while remaining > 0:
        m = min(remaining, max(1, CHUNK // cfg.lambda_draws))
        i = rng.integers(0, n, m)
        j = rng.integers(0, n, m)
        lam = _draw_lambda(cfg, rng, m * cfg.lambda_draws)
        losses = _mixed_loss(model, lossfam, X, y, np.repeat(i, cfg.lambda_draws),
                             np.repeat(j, cfg.lambda_draws), lam)
        samples.append(losses.reshape(m, cfg.lambda_draws).mean(axis=1))
        remaining -= m
    return _mean_and_se(np.concatenate(samples))


def mixup_loss_resampled(model, lossfam, dataset: Dataset, mix: LambdaMixture, draws: int,
                         seed: int = 0, fixed_lambda: float | None = None) -> tuple[float, float]:
    """Estimate the Mixup loss through its resampled form.

    Each of ``draws`` iid samples picks an index i, a random training input r
    and lam from the mixed-lambda distribution, and evaluates the loss at
    (lam x_i + (1 - lam) r, y_i).
    """
    require_nonempty(dataset)
    X, y = dataset.inputs, dataset.targets
    n = dataset.n
    rng = make_rng(seed)
    samples = []
    remaining = draws
    while remaining > 0:
        m = min(remaining, CHUNK)
        i = rng.integers(0, n, m)
        r = rng.integers(0, n, m)
        lam = sample_mixture(mix, rng, m)
        if fixed_lambda is not None:
            lam = np.full(m, float(fixed_lambda))
        xm = mix_points(X[i], X[r], lam)
        samples.append(pointwise_loss(lossfam, predict(model, xm), y[i]))
        remaining -= m
    return _mean_and_se(np.concatenate(samples))


@dataclass(frozen=True)
class InputMoments:
    """Mean and (uncentered) second-moment matrix of the perturbation inputs r_x."""

    mean: np.ndarray
    second: np.ndarray

    @classmethod
    def of(cls, X) -> "InputMoments":
        X = np.asarray(X, dtype=float)
        return cls(X.mean(axis=0), X.T @ X / X.shape[0])


def _perturbation_quadform(G, X, mom: InputMoments):
    """g_i^T E_r[(r - x_i)(r - x_i)^T] g_i for each row g_i of G."""
    gS = np.einsum("ij,jk,ik->i", G, mom.second, G)
    gm = G @ mom.mean
    gx = np.einsum("ij,ij->i", G, X)
    return gS - 2.0 * gm * gx + gx * gx


def _perturbation_apply(G, X, mom: InputMoments):
    """Rows M_i g_i with M_i = E_r[(r - x_i)(r - x_i)^T]."""
    gm = G @ mom.mean
    gx = np.einsum("ij,ij->i", G, X)
    return G @ mom.second - np.outer(gx, mom.mean) - X * gm[:, None] + X * gx[:, None]


def _input_grad_dot_jacobian(model, X, pattern, U):
    """Row i: parameter gradient of grad_x f(x_i) . u_i with the ReLU pattern frozen."""
    if isinstance(model, LinearModel):
        return U.copy()
    v = pattern * model.theta1
    dW = v[:, :, None] * U[:, None, :]
    dtheta1 = pattern * (U @ model.W.T)
    parts = [dW.reshape(X.shape[0], -1), dtheta1]
    if model.bias_enabled:
        parts.append(np.zeros((X.shape[0], 1)))
    return np.concatenate(parts, axis=1)


def approx_terms(model, lossfam, X, y, mom: InputMoments, c1: float, c2: float, with_grad: bool = False):
    """Standard loss and R1, R2, R3 over the rows (X, y), perturbing toward ``mom``.

    With ``with_grad`` also returns the parameter gradient of their sum; the R3
    contribution to the gradient is dropped because both model families have
    an input Hessian that is zero wherever the pattern is locally constant.
    """
    lossfam = get_loss_family(lossfam)
    n = X.shape[0]
    f = predict(model, X)
    G = grad_input(model, X)
    resid = lossfam.h_prime(f) - y
    curv = lossfam.h_double_prime(f)

    U = mom.mean - X
    a = np.einsum("ij,ij->i", G, U)
    q = _perturbation_quadform(G, X, mom)
    hess_term = np.array([
        np.trace(input_hessian(model, x) @ (mom.second - np.outer(mom.mean, x) - np.outer(x, mom.mean)
                                            + np.outer(x, x)))
        for x in X
    ])
    standard = float(np.mean(pointwise_loss(lossfam, f, y)))
    r1 = c1 / n * float(np.sum(resid * a))
    r2 = c2 / (2 * n) * float(np.sum(curv * q))
    r3 = c2 / (2 * n) * float(np.sum(resid * hess_term))
    bd = LossBreakdown(standard, r1, r2, r3)
    if not with_grad:
        return bd

    pattern = None if isinstance(model, LinearModel) else activation_pattern(model, X, warn=False)
    J = score_param_jacobian(model, X, pattern)
    dA = _input_grad_dot_jacobian(model, X, pattern, U)
    dQ = 2.0 * _input_grad_dot_jacobian(model, X, pattern, _perturbation_apply(G, X, mom))
    third = lossfam.h_triple_prime(f)
    grad = (resid / n) @ J
    grad += c1 / n * ((curv * a) @ J + resid @ dA)
    grad += c2 / (2 * n) * ((third * q) @ J + curv @ dQ)
    return bd, grad


def approx_mixup_loss(model, lossfam, dataset: Dataset, mix: LambdaMixture) -> LossBreakdown:
    """Second-order Mixup approximation; the Taylor remainder is not included."""
    require_nonempty(dataset)
    mom = InputMoments.of(dataset.inputs)
    return approx_terms(model, lossfam, dataset.inputs, dataset.targets, mom,
                        moment_one_minus_lambda(mix), moment_one_minus_lambda_sq(mix))


def require_centered(dataset: Dataset) -> None:
    if not is_centered(dataset):
        worst = float(np.max(np.abs(dataset.inputs.mean(axis=0)))) if dataset.n else float("nan")
        raise NotCentered(f"input mean has magnitude {worst:.3g}; center the dataset first")


def glm_regularizer_terms(model: LinearModel, lossfam, X, second: np.ndarray, ratio_moment: float,
                          with_grad: bool = False):
    lossfam = get_loss_family(lossfam)
    n = X.shape[0]
    s = X @ model.theta
    curv_sum = float(np.sum(lossfam.h_double_prime(s)))
    quad = float(model.theta @ second @ model.theta)
    value = curv_sum * ratio_moment * quad / (2 * n)
    if not with_grad:
        return value
    grad = ratio_moment / (2 * n) * (quad * (lossfam.h_triple_prime(s) @ X) + 2.0 * curv_sum * (second @ model.theta))
    return value, grad


def glm_regularizer(model: LinearModel, lossfam, dataset: Dataset, mix: LambdaMixture) -> float:
    """(1/2n) [sum_i h''(theta.x_i)] E[(1-lam)^2/lam^2] theta^T Sigma_hat theta on centered data."""
    require_nonempty(dataset)
    require_centered(dataset)
    ratio = moment_ratio_sq(mix)
    X = dataset.inputs
    return glm_regularizer_terms(model, lossfam, X, X.T @ X / dataset.n, ratio)


def hidden_covariance(net: TwoLayerNet, X) -> np.ndarray:
    H = hidden_features(net, X)
    Hc = H - H.mean(axis=0)
    return Hc.T @ Hc / H.shape[0]


def manifold_regularizer_terms(net: TwoLayerNet, X, ratio_moment: float, with_grad: bool = False):
    H = hidden_features(net, X)
    Hc = H - H.mean(axis=0)
    a = Hc @ net.theta1
    n = X.shape[0]
    value = ratio_moment * float(a @ a) / n
    if not with_grad:
        return value
    pattern = activation_pattern(net, X, warn=False)
    dtheta1 = 2.0 * ratio_moment / n * (Hc.T @ a)
    # the mean-feature term drops out because sum_k a_k = 0
    dW = 2.0 * ratio_moment / n * (((a[:, None] * pattern) * net.theta1).T @ X)
    parts = [dW.ravel(), dtheta1]
    if net.bias_enabled:
        parts.append(np.zeros(1))
    return value, np.concatenate(parts)


def manifold_mixup_regularizer(net: TwoLayerNet, dataset: Dataset, mix: LambdaMixture) -> float:
    """E[(1-lam)^2/lam^2] theta1^T Cov(relu(W x)) theta1, covariance normalized by 1/n."""
    require_nonempty(dataset)
    return manifold_regularizer_terms(net, dataset.inputs, moment_ratio_sq(mix))
