"""Minibatch SGD with momentum on ERM, Mixup and approximate-Mixup objectives."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from ._rng import spawn
from .data import Dataset, require_nonempty
from .distributions import moment_one_minus_lambda, moment_one_minus_lambda_sq, moment_ratio_sq, sample_beta
from .errors import ShapeMismatch
from .losses import (
    InputMoments,
    MixupConfig,
    approx_mixup_loss,
    approx_terms,
    empirical_loss,
    glm_regularizer_terms,
    manifold_regularizer_terms,
    mix_points,
    mixup_loss_mc,
    pointwise_loss,
)
from .models import LinearModel, TwoLayerNet, get_loss_family, grad_params, hidden_preactivation, predict
from .theorems import cosine_radii

OBJECTIVES = ("erm", "mixup_mc", "mixup_approx", "glm_approx", "manifold_mixup_approx")
METRIC_COLUMNS = [
    "epoch", "train_loss", "test_loss", "train_objective", "test_objective", "train_accuracy",
    "test_accuracy", "r_min", "standard", "r1", "r2", "r3", "total",
] + [f"r_hist_{k}" for k in range(10)]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    momentum: float = 0.9
    epochs: int = 400
    batch_size: int = 64
    weight_decay: float = 0.0
    seed: int = 0
    objective: str = "erm"
    mixup: MixupConfig | None = None
    log_every: int = 1
    track_r: bool = False
    # evaluate each model's own objective on train/test at logged epochs
    log_objective: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}; choose from {OBJECTIVES}")
        if self.objective != "erm" and self.mixup is None:
            object.__setattr__(self, "mixup", MixupConfig())
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")


@dataclass
class MetricLog:
    records: list = field(default_factory=list)
    epoch_accuracy_first_100: int | None = None

    def append(self, record: dict) -> None:
        if self.records and record["epoch"] <= self.records[-1]["epoch"]:
            raise ValueError("epochs must increase")
        self.records.append(record)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.records], dtype=float)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRIC_COLUMNS)
            for r in self.records:
                writer.writerow([_fmt(r.get(c, "")) for c in METRIC_COLUMNS])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def sgd_step(model, gradient, velocity, cfg: TrainConfig):
    """velocity' = momentum * velocity + gradient + weight_decay * params; params' = params - lr * velocity'."""
    params = model.params()
    gradient = np.asarray(gradient, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    if gradient.shape != params.shape or velocity.shape != params.shape:
        raise ShapeMismatch(f"params {params.shape}, gradient {gradient.shape}, velocity {velocity.shape}")
    new_velocity = cfg.momentum * velocity + gradient
    if cfg.weight_decay:
        new_velocity = new_velocity + cfg.weight_decay * params
    return model.with_params(params - cfg.learning_rate * new_velocity), new_velocity


def make_objective(objective: str, lossfam, train_inputs=None, mixup: MixupConfig | None = None) -> Callable:
    """Return ``evaluate(model, X, y) -> (value, grad)`` for a deterministic objective.

    ``mixup_mc`` is evaluated as ERM on an already-mixed batch; the mixing
    happens in :func:`train`.
    """
    lossfam = get_loss_family(lossfam)
    if objective in ("erm", "mixup_mc"):
        def evaluate(model, X, y):
            value = float(np.mean(pointwise_loss(lossfam, predict(model, X), y)))
            return value, grad_params(model, lossfam, (X, y))
        return evaluate

    mix = (mixup or MixupConfig()).mixture
    if objective == "mixup_approx":
        mom = InputMoments.of(train_inputs)
        c1, c2 = moment_one_minus_lambda(mix), moment_one_minus_lambda_sq(mix)

        def evaluate(model, X, y):
            bd, grad = approx_terms(model, lossfam, X, y, mom, c1, c2, with_grad=True)
            return bd.total, grad
        return evaluate

    ratio = moment_ratio_sq(mix)
    if objective == "glm_approx":
        second = InputMoments.of(train_inputs).second

        def evaluate(model, X, y):
            if not isinstance(model, LinearModel):
                raise TypeError("glm_approx needs a LinearModel")
            std = float(np.mean(pointwise_loss(lossfam, predict(model, X), y)))
            reg, reg_grad = glm_regularizer_terms(model, lossfam, X, second, ratio, with_grad=True)
            return std + reg, grad_params(model, lossfam, (X, y)) + reg_grad
        return evaluate

    if objective == "manifold_mixup_approx":
        def evaluate(model, X, y):
            if not isinstance(model, TwoLayerNet):
                raise TypeError("manifold_mixup_approx needs a TwoLayerNet")
            std = float(np.mean(pointwise_loss(lossfam, predict(model, X), y)))
            reg, reg_grad = manifold_regularizer_terms(model, X, ratio, with_grad=True)
            return std + reg, grad_params(model, lossfam, (X, y)) + reg_grad
        return evaluate
    raise ValueError(f"unknown objective {objective!r}")


class GradCheck(NamedTuple):
    max_rel_error: float
    excluded: int
    used: int


def _pattern_stable(model, X, step):
    if not isinstance(model, TwoLayerNet):
        return np.ones(X.shape[0], dtype=bool)
    # a +-step probe on one parameter moves each pre-activation by at most step * max|x|
    margin = np.min(np.abs(hidden_preactivation(model, X)), axis=1)
    return margin > 4.0 * step * np.maximum(1.0, np.max(np.abs(X), axis=1))


def finite_diff_check(model, lossfam, evaluator: Callable, batch, step: float = 1e-5) -> GradCheck:
    """Max per-coordinate relative error between the analytic and central-difference gradients.

    Relative error is |a - n| / max(|a|, |n|, 1e-3 * max|a|, 1e-12); net inputs whose
    activation pattern could flip under a probe are dropped and counted.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    X, y = batch
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    stable = _pattern_stable(model, X, step)
    X, y = X[stable], y[stable]
    excluded = int(np.sum(~stable))
    if X.shape[0] == 0:
        return GradCheck(float("nan"), excluded, 0)
    _, analytic = evaluator(model, X, y)
    params = model.params()
    numeric = np.empty_like(params)
    for k in range(params.size):
        e = np.zeros_like(params)
        e[k] = step
        fp, _ = evaluator(model.with_params(params + e), X, y)
        fm, _ = evaluator(model.with_params(params - e), X, y)
        numeric[k] = (fp - fm) / (2.0 * step)
    scale = np.maximum.reduce([np.abs(analytic), np.abs(numeric),
                               np.full_like(analytic, 1e-3 * np.max(np.abs(analytic))),
                               np.full_like(analytic, 1e-12)])
    return GradCheck(float(np.max(np.abs(analytic - numeric) / scale)), excluded, int(X.shape[0]))


def accuracy(model, dataset: Dataset) -> float:
    pred = (predict(model, dataset.inputs) >= 0).astype(float)
    return float(np.mean(pred == dataset.targets))


def _is_binary(dataset: Dataset) -> bool:
    return bool(np.all((dataset.targets == 0) | (dataset.targets == 1)))


def objective_loss(model, lossfam, dataset: Dataset, objective: str, mixup: MixupConfig | None) -> float:
    """The value a model trained on ``objective`` reports as its own loss on ``dataset``."""
    if objective == "erm":
        return empirical_loss(model, lossfam, dataset)
    if objective == "mixup_mc":
        return mixup_loss_mc(model, lossfam, dataset, mixup)[0]
    if objective == "mixup_approx":
        return approx_mixup_loss(model, lossfam, dataset, mixup.mixture).total
    evaluate = make_objective(objective, lossfam, dataset.inputs, mixup)
    return evaluate(model, dataset.inputs, dataset.targets)[0]


def _log_record(model, lossfam, train_set, test_set, cfg: TrainConfig, epoch: int) -> dict:
    rec = {"epoch": epoch, "train_loss": empirical_loss(model, lossfam, train_set)}
    if test_set is not None and test_set.n:
        rec["test_loss"] = empirical_loss(model, lossfam, test_set)
    if _is_binary(train_set):
        rec["train_accuracy"] = accuracy(model, train_set)
        if test_set is not None and test_set.n:
            rec["test_accuracy"] = accuracy(model, test_set)
    if cfg.log_objective:
        rec["train_objective"] = objective_loss(model, lossfam, train_set, cfg.objective, cfg.mixup)
        if test_set is not None and test_set.n:
            rec["test_objective"] = objective_loss(model, lossfam, test_set, cfg.objective, cfg.mixup)
    if cfg.objective == "mixup_approx":
        bd = approx_mixup_loss(model, lossfam, train_set, cfg.mixup.mixture)
        rec.update(standard=bd.standard, r1=bd.r1, r2=bd.r2, r3=bd.r3, total=bd.total)
    if cfg.track_r:
        radii, r_min = cosine_radii(model, train_set)
        rec["r_min"] = r_min
        rec["radii"] = radii
        counts, _ = np.histogram(radii, bins=10, range=(0.0, 1.0))
        rec.update({f"r_hist_{k}": int(c) for k, c in enumerate(counts)})
    return rec


def train(model_init, lossfam, train_set: Dataset, test_set: Dataset | None, cfg: TrainConfig,
          stop_when: Callable | None = None, on_epoch: Callable | None = None):
    """Run ``cfg.epochs`` epochs of minibatch SGD; returns (model, MetricLog).

    ``on_epoch(epoch, model)`` sees the initial model (epoch 0) and the model
    after every epoch. ``stop_when(model)`` is checked after every epoch and
    ends training early when it returns True.
    """
    require_nonempty(train_set)
    lossfam = get_loss_family(lossfam)
    X, y = train_set.inputs, train_set.targets
    n = train_set.n
    evaluate = make_objective(cfg.objective, lossfam, X, cfg.mixup)
    shuffle_rng, mix_rng = spawn(cfg.seed, 2)

    model = model_init
    velocity = np.zeros_like(model.params())
    log = MetricLog()

    def record(epoch):
        rec = _log_record(model, lossfam, train_set, test_set, cfg, epoch)
        if log.epoch_accuracy_first_100 is None and rec.get("train_accuracy") == 1.0:
            log.epoch_accuracy_first_100 = epoch
        log.append(rec)

    record(0)
    if on_epoch is not None:
        on_epoch(0, model)
    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            Xb, yb = X[idx], y[idx]
            if cfg.objective == "mixup_mc":
                partner = mix_rng.integers(0, n, idx.size)
                lam = sample_beta(cfg.mixup.beta_params, mix_rng, idx.size)
                if cfg.mixup.fixed_lambda is not None:
                    lam = np.full(idx.size, float(cfg.mixup.fixed_lambda))
                Xb = mix_points(Xb, X[partner], lam)
                yb = mix_points(yb, y[partner], lam)
            _, grad = evaluate(model, Xb, yb)
            model, velocity = sgd_step(model, grad, velocity, cfg)
        if on_epoch is not None:
            on_epoch(epoch, model)
        stop = stop_when is not None and stop_when(model)
        if epoch % cfg.log_every == 0 or epoch == cfg.epochs or stop:
            record(epoch)
        if stop:
            break
    return model, log
