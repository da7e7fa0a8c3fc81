"""Rademacher complexity estimates, complexity/generalization bounds and gap measurement."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._rng import make_rng
from .data import Dataset, require_nonempty
from .errors import DegenerateData, InvalidDelta, InvalidRho
from .losses import empirical_loss
from .models import TwoLayerNet, get_loss_family, hidden_features

RANK_TOL = 1e-10
BOUND_COLUMNS = ["gamma", "rho_hat", "rank", "n", "bound_glm", "rad_mc_mean", "rad_mc_se", "bound_net"]


@dataclass(frozen=True)
class RademacherEstimate:
    mean: float
    std_error: float
    n_draws: int


@dataclass(frozen=True)
class HiddenFeatureStats:
    sigma_cov: np.ndarray
    sigma_mean: np.ndarray
    rank: int
    mu_pullback_sq: float
    mean_outside_range: bool = False


def _inputs(data) -> np.ndarray:
    return data.inputs if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))


def estimate_rademacher_ball(data, radius_B: float, n_draws: int = 2000, seed: int = 0) -> RademacherEstimate:
    """Monte Carlo E_xi sup_{||v|| <= B} (1/n) sum_i xi_i v.x_i = B E_xi ||(1/n) sum_i xi_i x_i||."""
    if radius_B < 0:
        raise ValueError("radius_B must be nonnegative")
    X = _inputs(data)
    n = X.shape[0]
    xi = make_rng(seed).choice(np.array([-1.0, 1.0]), size=(n_draws, n))
    vals = radius_B * np.linalg.norm(xi @ X, axis=1) / n
    se = float(vals.std(ddof=1) / math.sqrt(n_draws)) if n_draws > 1 else 0.0
    return RademacherEstimate(float(vals.mean()), se, n_draws)


def exhaustive_rademacher_ball(data, radius_B: float) -> float:
    """Exact value by enumerating all 2^n sign vectors (small n only)."""
    X = _inputs(data)
    n = X.shape[0]
    if n > 20:
        raise ValueError("exhaustive enumeration is limited to n <= 20")
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    return float(radius_B * np.mean(np.linalg.norm(signs @ X, axis=1)) / n)


def numerical_rank(eigvals: np.ndarray, rel_tol: float = RANK_TOL) -> int:
    top = float(np.max(eigvals)) if eigvals.size else 0.0
    if top <= 0:
        return 0
    return int(np.sum(eigvals > rel_tol * top))


def whitened_inputs(data, rel_tol: float = RANK_TOL) -> tuple[np.ndarray, int]:
    """Rows Sigma_hat^{+1/2} x_i with Sigma_hat = (1/n) sum x_i x_i^T, plus its numerical rank."""
    X = _inputs(data)
    evals, evecs = np.linalg.eigh(X.T @ X / X.shape[0])
    rank = numerical_rank(evals, rel_tol)
    keep = evals > rel_tol * max(float(evals.max()), 0.0) if rank else np.zeros_like(evals, bool)
    inv_sqrt = np.zeros_like(evals)
    inv_sqrt[keep] = 1.0 / np.sqrt(evals[keep])
    return X @ (evecs * inv_sqrt) @ evecs.T, rank


def rademacher_bound_glm(gamma: float, rho: float, rank_sigma: int, n: int) -> float:
    """max{(gamma/rho)^(1/4), (gamma/rho)^(1/2)} * sqrt(rank / n)."""
    if not 0.0 < rho <= 0.5:
        raise InvalidRho(f"rho must lie in (0, 1/2], got {rho}")
    if gamma < 0 or n < 1:
        raise ValueError("need gamma >= 0 and n >= 1")
    ratio = gamma / rho
    return max(ratio ** 0.25, ratio ** 0.5) * math.sqrt(rank_sigma / n)


def glm_class_radius(gamma: float, rho: float) -> float:
    """Whitened-ball radius sqrt(max{(gamma/rho)^(1/2), gamma/rho}) containing the constrained class."""
    ratio = gamma / rho
    return math.sqrt(max(math.sqrt(ratio), ratio))


def estimate_rho(data, lossfam, v_draws: int = 2000, seed: int = 0, max_norm: float = 1.0) -> float:
    """Sampled infimum of [E h''(x.v)]^2 / min{1, E (v.x)^2}, clamped to (0, 1/2].

    Half of the directions are unit vectors, half are scaled uniformly in
    (0, max_norm]. Being an infimum over finitely many v, the value is an
    upper estimate of the true retentiveness constant.
    """
    X = _inputs(data)
    if X.size == 0 or not np.any(X):
        raise DegenerateData("all inputs are zero")
    lossfam = get_loss_family(lossfam)
    rng = make_rng(seed)
    V = rng.standard_normal((v_draws, X.shape[1]))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    V[v_draws // 2:] *= max_norm * (1.0 - rng.random((v_draws - v_draws // 2, 1)))
    S = X @ V.T
    numer = np.mean(lossfam.h_double_prime(S), axis=0) ** 2
    second = np.mean(S * S, axis=0)
    usable = second > 0
    ratios = numer[usable] / np.minimum(1.0, second[usable])
    est = float(ratios.min()) if ratios.size else 0.5
    return min(max(est, np.finfo(float).tiny), 0.5)


def generalization_bound_glm(std_train_loss: float, gamma: float, rho: float, rank_sigma: int, n: int,
                             lipschitz_L: float = 1.0, lipschitz_LA: float = 1.0, bound_B: float = 1.0,
                             delta: float = 0.05) -> float:
    if not 0.0 < delta <= 1.0:
        raise InvalidDelta(f"delta must lie in (0, 1], got {delta}")
    complexity = rademacher_bound_glm(gamma, rho, rank_sigma, n)
    return std_train_loss + 2.0 * lipschitz_L * lipschitz_LA * complexity + bound_B * math.sqrt(
        math.log(1.0 / delta) / (2 * n))


def hidden_feature_stats(net: TwoLayerNet, dataset: Dataset, rel_tol: float = RANK_TOL) -> HiddenFeatureStats:
    require_nonempty(dataset)
    H = hidden_features(net, dataset.inputs)
    mu = H.mean(axis=0)
    Hc = H - mu
    cov = Hc.T @ Hc / H.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    rank = numerical_rank(evals, rel_tol)
    if rank == 0:
        return HiddenFeatureStats(cov, mu, 0, 0.0, mean_outside_range=bool(np.any(mu)))
    keep = evals > rel_tol * evals.max()
    coords = evecs[:, keep].T @ mu
    pullback = float(np.sum(coords ** 2 / evals[keep]))
    residual = mu - evecs[:, keep] @ coords
    outside = bool(np.linalg.norm(residual) > 1e-8 * max(1.0, np.linalg.norm(mu)))
    return HiddenFeatureStats(cov, mu, rank, pullback, outside)


def rademacher_bound_net(gamma: float, stats: HiddenFeatureStats, n: int) -> float:
    """2 sqrt(gamma (rank + ||Sigma^{+1/2} mu||^2) / n)."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return 2.0 * math.sqrt(gamma * (stats.rank + stats.mu_pullback_sq) / n)


def generalization_bound_net(std_train_loss: float, gamma: float, stats: HiddenFeatureStats, n: int,
                             lipschitz_L: float = 1.0, bound_B: float = 1.0, delta: float = 0.05) -> float:
    if not 0.0 < delta <= 1.0:
        raise InvalidDelta(f"delta must lie in (0, 1], got {delta}")
    # 4L sqrt(...) = 2L * (the 2 sqrt(...) complexity bound)
    return (std_train_loss + 2.0 * lipschitz_L * rademacher_bound_net(gamma, stats, n)
            + bound_B * math.sqrt(math.log(1.0 / delta) / (2 * n)))


def attained_gamma_net(net: TwoLayerNet, stats: HiddenFeatureStats) -> float:
    return float(net.theta1 @ stats.sigma_cov @ net.theta1)


def generalization_gap(model, lossfam, train_set: Dataset, test_set: Dataset) -> float:
    return empirical_loss(model, lossfam, test_set) - empirical_loss(model, lossfam, train_set)
