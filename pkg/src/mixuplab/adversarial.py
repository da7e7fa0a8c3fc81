"""FGSM, exact and quadratic l2 adversarial losses, and robust-accuracy sweeps."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset, require_nonempty
from .errors import ZeroParameter
from .losses import pointwise_loss
from .models import LOGISTIC, LinearModel, get_loss_family, grad_input, predict

ROBUST_COLUMNS = ["epsilon", "accuracy", "attack_method", "norm", "n_points", "seed"]


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 0.0
    norm: str = "linf"
    method: str = "fgsm"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.norm not in ("linf", "l2"):
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.method not in ("fgsm", "exact_l2_linear", "quad_approx"):
            raise ValueError(f"unknown attack method {self.method!r}")


def loss_input_gradient(model, lossfam, x, y):
    """d/dx of h(f(x)) - y f(x)."""
    lossfam = get_loss_family(lossfam)
    f = predict(model, x)
    G = grad_input(model, x)
    resid = lossfam.h_prime(f) - np.asarray(y, dtype=float)
    return resid[..., None] * G if np.ndim(G) == 2 else resid * G


def fgsm_attack(model, lossfam, x, y, epsilon: float):
    """x + epsilon * sign(grad_x loss); sign(0) = 0."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    x = np.asarray(x, dtype=float)
    return x + epsilon * np.sign(loss_input_gradient(model, lossfam, x, y))


def exact_l2_adv_loss_linear(model: LinearModel, lossfam, x, y, eta: float):
    """max over ||delta||_2 <= eta of the logistic loss of a linear scorer.

    The loss is monotone in the score, so the worst delta moves the score by
    eta * ||theta|| against the label.
    """
    if get_loss_family(lossfam).name != "logistic":
        raise ValueError("exact l2 adversarial loss is implemented for the logistic family only")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    norm = float(np.linalg.norm(model.theta))
    if norm == 0.0:
        warnings.warn("theta = 0: adversarial loss equals the clean loss", ZeroParameter, stacklevel=2)
    y = np.asarray(y, dtype=float)
    s = predict(model, x)
    shifted = s + np.where(y > 0.5, -1.0, 1.0) * eta * norm
    out = pointwise_loss(LOGISTIC, shifted, y)
    return float(out) if np.ndim(out) == 0 else out


def _quad_adv(model, lossfam, x, y, eta):
    lossfam = get_loss_family(lossfam)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0):
        raise ValueError("eta must be nonnegative")
    y = np.asarray(y, dtype=float)
    f = predict(model, x)
    G = grad_input(model, x)
    gnorm = np.linalg.norm(G, axis=-1)
    out = (pointwise_loss(lossfam, f, y)
           + eta * np.abs(lossfam.h_prime(f) - y) * gnorm
           + 0.5 * eta ** 2 * np.abs(lossfam.h_double_prime(f)) * gnorm ** 2)
    return float(out) if np.ndim(out) == 0 else out


def quad_adv_loss_glm(model: LinearModel, x, y, eta: float):
    """l + eta |g - y| ||theta|| + (eta^2 / 2) g (1 - g) ||theta||^2, g at the clean score."""
    return _quad_adv(model, LOGISTIC, x, y, eta)


def quad_adv_loss_net(net, x, y, eta: float):
    """Same expansion with grad_x f(x) in place of theta (eta = eps * sqrt(d))."""
    return _quad_adv(net, LOGISTIC, x, y, eta)


def pgd_l2_adv_loss(model, lossfam, x, y, eta: float, steps: int = 20):
    """Projected gradient ascent on the l2 ball; a heuristic lower bound on the true maximum."""
    lossfam = get_loss_family(lossfam)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    delta = np.zeros_like(x)
    best = pointwise_loss(lossfam, predict(model, x), y)
    step = eta / 10.0
    for _ in range(steps):
        g = loss_input_gradient(model, lossfam, x + delta, y)
        gn = np.linalg.norm(g, axis=1, keepdims=True)
        delta = delta + step * np.divide(g, gn, out=np.zeros_like(g), where=gn > 0)
        dn = np.linalg.norm(delta, axis=1, keepdims=True)
        delta = np.where(dn > eta, delta * eta / np.maximum(dn, 1e-300), delta)
        best = np.maximum(best, pointwise_loss(lossfam, predict(model, x + delta), y))
    return best


def _perturb(model, lossfam, X, y, epsilon, attack: AttackConfig):
    if attack.method == "fgsm":
        return fgsm_attack(model, lossfam, X, y, epsilon)
    radius = epsilon if attack.norm == "l2" else epsilon * np.sqrt(X.shape[1])
    # worst-case direction for a score-monotone loss: move along +-grad_x f against the label
    G = grad_input(model, X)
    if attack.method == "exact_l2_linear":
        if not isinstance(model, LinearModel):
            raise ValueError("exact_l2_linear attacks require a linear model")
    gn = np.linalg.norm(G, axis=1, keepdims=True)
    unit = np.divide(G, gn, out=np.zeros_like(G), where=gn > 0)
    direction = np.where(y > 0.5, -1.0, 1.0)[:, None]
    return X + radius * direction * unit


def robust_accuracy(model, lossfam, dataset: Dataset, epsilons, attack: AttackConfig | None = None,
                    seed=None) -> list[dict]:
    """Accuracy of 1{f >= 0} on attacked inputs, one record per epsilon."""
    require_nonempty(dataset)
    attack = attack or AttackConfig()
    X, y = dataset.inputs, dataset.targets
    records = []
    for eps in epsilons:
        Xa = X if eps == 0 else _perturb(model, lossfam, X, y, float(eps), attack)
        pred = (predict(model, Xa) >= 0).astype(float)
        records.append({"epsilon": float(eps), "accuracy": float(np.mean(pred == y)),
                        "attack_method": attack.method, "norm": attack.norm,
                        "n_points": dataset.n, "seed": seed})
    return records
