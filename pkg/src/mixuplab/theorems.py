"""Numerical certificates for the Mixup-vs-adversarial-loss inequality chains.

For a model in the zero-training-error region on centered data, the
approximate Mixup loss dominates the mean quadratic adversarial loss at the
per-point radii ``eps_i * sqrt(d)``, which in turn dominates it at the common
radius ``eps_mix * sqrt(d)``. :func:`check_theorem_linear` and
:func:`check_theorem_net` evaluate all three quantities and report whether
both inequalities hold up to a relative tolerance.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .adversarial import quad_adv_loss_glm, quad_adv_loss_net
from .data import Dataset, require_nonempty
from .distributions import LambdaMixture, moment_one_minus_lambda
from .errors import EulerIdentityViolated, NotInTheta, ZeroInput
from .losses import approx_mixup_loss, require_centered
from .models import LinearModel, TwoLayerNet, get_loss_family, grad_input, predict

EULER_TOL = 1e-9
REPORT_CSV_COLUMNS = ["lhs", "mid", "rhs", "r_min", "eps_mix", "holds_chain", "n", "d"]


@dataclass
class TheoremReport:
    in_theta: bool
    c_x: float
    radii: np.ndarray
    r_min: float
    eps_i: np.ndarray
    eps_mix: float
    lhs: float
    mid: float
    rhs: float
    holds_chain: bool
    tolerance: float
    n: int = 0
    d: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["radii"] = np.asarray(self.radii).tolist()
        doc["eps_i"] = np.asarray(self.eps_i).tolist()
        return doc

    def csv_row(self) -> list:
        return [self.lhs, self.mid, self.rhs, self.r_min, self.eps_mix, int(self.holds_chain), self.n, self.d]


def in_theta_region(model, dataset: Dataset) -> bool:
    """True iff every score has the sign of its label (zero counts for both)."""
    f = predict(model, dataset.inputs)
    y = dataset.targets
    return bool(np.all(y * f + (y - 1.0) * f >= 0.0))


def cosine_radii(model, dataset: Dataset) -> tuple[np.ndarray, float]:
    """R_i = |cos(grad_x f(x_i), x_i)| and their minimum; R_i = 0 where the gradient vanishes."""
    require_nonempty(dataset)
    X = dataset.inputs
    xnorm = np.linalg.norm(X, axis=1)
    if np.any(xnorm == 0):
        raise ZeroInput(f"{int(np.sum(xnorm == 0))} input vectors are exactly zero")
    G = grad_input(model, X)
    gnorm = np.linalg.norm(G, axis=1)
    dots = np.abs(np.einsum("ij,ij->i", G, X))
    radii = np.divide(dots, gnorm * xnorm, out=np.zeros_like(dots), where=gnorm > 0)
    radii = np.minimum(radii, 1.0)
    return radii, float(radii.min())


def euler_residuals(model, X) -> np.ndarray:
    f = predict(model, X)
    return np.abs(f - np.einsum("ij,ij->i", grad_input(model, X), X)) / (1.0 + np.abs(f))


def _check_chain(model, lossfam, dataset: Dataset, mix: LambdaMixture, tolerance: float, quad) -> TheoremReport:
    if get_loss_family(lossfam).name != "logistic":
        raise ValueError("the inequality chain is stated for the logistic loss")
    require_nonempty(dataset)
    require_centered(dataset)
    if not in_theta_region(model, dataset):
        raise NotInTheta("model misclassifies a training point with a strict wrong sign")
    radii, r_min = cosine_radii(model, dataset)
    X, y = dataset.inputs, dataset.targets
    d = dataset.p
    c_x = float(np.min(np.linalg.norm(X, axis=1)) / np.sqrt(d))
    shrink = moment_one_minus_lambda(mix)
    eps_i = radii * c_x * shrink
    eps_mix = r_min * c_x * shrink
    lhs = approx_mixup_loss(model, lossfam, dataset, mix).total
    mid = float(np.mean(quad(model, X, y, eps_i * np.sqrt(d))))
    rhs = float(np.mean(quad(model, X, y, eps_mix * np.sqrt(d))))
    tol = tolerance * (1.0 + abs(lhs))
    holds = lhs >= mid - tol and mid >= rhs - tol
    return TheoremReport(True, c_x, radii, r_min, eps_i, float(eps_mix), float(lhs), mid, rhs,
                         bool(holds), tolerance, n=dataset.n, d=d)


def check_theorem_linear(model: LinearModel, lossfam, dataset: Dataset, mix: LambdaMixture,
                         tolerance: float = 1e-9) -> TheoremReport:
    return _check_chain(model, lossfam, dataset, mix, tolerance, quad_adv_loss_glm)


def check_theorem_net(net: TwoLayerNet, lossfam, dataset: Dataset, mix: LambdaMixture,
                      tolerance: float = 1e-9) -> TheoremReport:
    require_nonempty(dataset)
    resid = euler_residuals(net, dataset.inputs)
    if np.any(resid > EULER_TOL):
        raise EulerIdentityViolated(
            f"|f - grad f . x| / (1 + |f|) reaches {resid.max():.3g}; the chain needs a bias-free net"
        )
    report = _check_chain(net, lossfam, dataset, mix, tolerance, quad_adv_loss_net)
    report.extra["max_euler_residual"] = float(resid.max())
    return report
