"""Linear scorers and bias-optional two-layer ReLU nets with hand-written derivatives.

Losses have the form ``h(f) - y * f``; :class:`LossFamily` bundles ``h`` and its
first three derivatives (the third is only needed for gradients of the
curvature-weighted regularizers).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._rng import box_muller, make_rng
from .errors import ActivationBoundary, DimensionMismatch, ShapeMismatch


def sigmoid(z):
    # tanh form is overflow-free in both tails
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def softplus(z):
    return np.logaddexp(0.0, z)


@dataclass(frozen=True)
class LossFamily:
    name: str
    h: Callable
    h_prime: Callable
    h_double_prime: Callable
    h_triple_prime: Callable


def _logistic_h2(z):
    g = sigmoid(z)
    return g * (1.0 - g)


def _logistic_h3(z):
    g = sigmoid(z)
    return g * (1.0 - g) * (1.0 - 2.0 * g)


LOGISTIC = LossFamily("logistic", softplus, sigmoid, _logistic_h2, _logistic_h3)
SQUARED = LossFamily(
    "squared",
    lambda z: 0.5 * np.square(z),
    lambda z: np.asarray(z, dtype=float),
    lambda z: np.ones_like(np.asarray(z, dtype=float)),
    lambda z: np.zeros_like(np.asarray(z, dtype=float)),
)
LOSS_FAMILIES = {"logistic": LOGISTIC, "squared": SQUARED}


def get_loss_family(name) -> LossFamily:
    if isinstance(name, LossFamily):
        return name
    try:
        return LOSS_FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown loss family {name!r}") from None


@dataclass(frozen=True)
class LinearModel:
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float).reshape(-1))

    @property
    def input_dim(self) -> int:
        return self.theta.shape[0]

    def params(self) -> np.ndarray:
        return self.theta.copy()

    def with_params(self, flat) -> "LinearModel":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != self.theta.shape:
            raise ShapeMismatch(f"expected {self.theta.shape} parameters, got {flat.shape}")
        return LinearModel(flat.copy())


@dataclass(frozen=True)
class TwoLayerNet:
    """f(x) = theta1 . relu(W x) + theta0, with W of shape (hidden, input)."""

    W: np.ndarray
    theta1: np.ndarray
    theta0: float = 0.0
    bias_enabled: bool = False

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        theta1 = np.asarray(self.theta1, dtype=float).reshape(-1)
        if W.shape[0] != theta1.shape[0]:
            raise ShapeMismatch(f"W has {W.shape[0]} rows but theta1 has {theta1.shape[0]} entries")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "theta1", theta1)
        object.__setattr__(self, "theta0", float(self.theta0) if self.bias_enabled else 0.0)

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W.shape[0]

    def params(self) -> np.ndarray:
        parts = [self.W.ravel(), self.theta1]
        if self.bias_enabled:
            parts.append(np.array([self.theta0]))
        return np.concatenate(parts)

    def with_params(self, flat) -> "TwoLayerNet":
        flat = np.asarray(flat, dtype=float)
        nw = self.W.size
        expected = nw + self.hidden_dim + int(self.bias_enabled)
        if flat.shape != (expected,):
            raise ShapeMismatch(f"expected {expected} parameters, got {flat.shape}")
        W = flat[:nw].reshape(self.W.shape).copy()
        theta1 = flat[nw:nw + self.hidden_dim].copy()
        theta0 = flat[-1] if self.bias_enabled else 0.0
        return TwoLayerNet(W, theta1, theta0, self.bias_enabled)


def _as_batch(model, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.input_dim:
        raise DimensionMismatch(f"model expects inputs of dimension {model.input_dim}, got {X.shape[1]}")
    return X, single


def hidden_preactivation(net: TwoLayerNet, X: np.ndarray) -> np.ndarray:
    return X @ net.W.T


def hidden_features(net: TwoLayerNet, X) -> np.ndarray:
    X, _ = _as_batch(net, X)
    return np.maximum(hidden_preactivation(net, X), 0.0)


def predict(model, x):
    """Score f(x); accepts one input vector or an (n, p) batch."""
    X, single = _as_batch(model, x)
    if isinstance(model, LinearModel):
        out = X @ model.theta
    else:
        out = np.maximum(hidden_preactivation(model, X), 0.0) @ model.theta1 + model.theta0
    return float(out[0]) if single else out


def activation_pattern(net: TwoLayerNet, X: np.ndarray, warn: bool = True) -> np.ndarray:
    pre = hidden_preactivation(net, X)
    if warn and np.any(pre == 0.0):
        warnings.warn("pre-activation exactly 0; using subgradient value 0", ActivationBoundary, stacklevel=3)
    return (pre > 0.0).astype(float)


def grad_input(model, x):
    """Input gradient of f, with the ReLU pattern held fixed (value 0 at the kink)."""
    X, single = _as_batch(model, x)
    if isinstance(model, LinearModel):
        G = np.broadcast_to(model.theta, X.shape).copy()
    else:
        S = activation_pattern(model, X)
        G = (S * model.theta1) @ model.W
    return G[0] if single else G


def input_hessian(model, x) -> np.ndarray:
    """Input Hessian of f; identically zero for both model families (off the kinks)."""
    _as_batch(model, x)
    p = model.input_dim
    return np.zeros((p, p))


def hessian_input_quadform(model, x, v) -> float:
    v = np.asarray(v, dtype=float)
    if v.shape != (model.input_dim,):
        raise DimensionMismatch(f"direction has shape {v.shape}, expected ({model.input_dim},)")
    return float(v @ input_hessian(model, x) @ v)


def score_param_jacobian(model, X: np.ndarray, pattern: np.ndarray | None = None) -> np.ndarray:
    """Row i is d f(x_i) / d params, in the layout of ``model.params()``."""
    X, _ = _as_batch(model, X)
    if isinstance(model, LinearModel):
        return X.copy()
    S = activation_pattern(model, X, warn=False) if pattern is None else pattern
    H = np.maximum(hidden_preactivation(model, X), 0.0)
    dW = (S * model.theta1)[:, :, None] * X[:, None, :]
    parts = [dW.reshape(X.shape[0], -1), H]
    if model.bias_enabled:
        parts.append(np.ones((X.shape[0], 1)))
    return np.concatenate(parts, axis=1)


def _unpack_batch(model, batch):
    X, y = batch
    X, _ = _as_batch(model, X)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} inputs but {y.shape[0]} targets")
    return X, y


def grad_params(model, lossfam, batch) -> np.ndarray:
    """Gradient of the mean of h(f) - y f over the batch, flattened like ``model.params()``."""
    lossfam = get_loss_family(lossfam)
    X, y = _unpack_batch(model, batch)
    f = predict(model, X)
    coeff = (lossfam.h_prime(f) - y) / X.shape[0]
    return coeff @ score_param_jacobian(model, X)


INIT_STREAM = 0x1A17  # keeps init draws independent of data drawn with the same seed


def init_linear(input_dim: int, seed: int) -> LinearModel:
    rng = make_rng([seed, INIT_STREAM])
    return LinearModel(box_muller(rng, input_dim) / np.sqrt(input_dim))


def init_two_layer(input_dim: int, hidden_dim: int, seed: int, bias_enabled: bool = False) -> TwoLayerNet:
    rng = make_rng([seed, INIT_STREAM])
    W = box_muller(rng, (hidden_dim, input_dim)) / np.sqrt(input_dim)
    theta1 = box_muller(rng, hidden_dim) / np.sqrt(hidden_dim)
    theta0 = float(box_muller(rng, 1)[0]) if bias_enabled else 0.0
    return TwoLayerNet(W, theta1, theta0, bias_enabled)


def model_to_dict(model, seed=None, metadata: dict | None = None) -> dict:
    if isinstance(model, LinearModel):
        doc = {"kind": "linear", "dims": {"input": model.input_dim},
               "parameters": {"theta": model.theta.tolist()}}
    else:
        doc = {"kind": "two_layer_relu",
               "dims": {"input": model.input_dim, "hidden": model.hidden_dim,
                        "bias_enabled": model.bias_enabled},
               "parameters": {"W": model.W.ravel().tolist(), "theta1": model.theta1.tolist(),
                              "theta0": model.theta0}}
    doc["seed"] = seed
    doc["metadata"] = metadata or {}
    return doc


def model_from_dict(doc: dict):
    kind = doc["kind"]
    dims, params = doc["dims"], doc["parameters"]
    if kind == "linear":
        theta = np.array(params["theta"], dtype=float)
        if theta.shape != (dims["input"],):
            raise ShapeMismatch("theta length does not match dims.input")
        return LinearModel(theta)
    if kind == "two_layer_relu":
        W = np.array(params["W"], dtype=float).reshape(dims["hidden"], dims["input"])
        return TwoLayerNet(W, np.array(params["theta1"], dtype=float), params["theta0"], dims["bias_enabled"])
    raise ValueError(f"unknown model kind {kind!r}")


def save_checkpoint(model, path, seed=None, metadata: dict | None = None) -> None:
    # json writes floats with repr(), which round-trips every double exactly
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, seed, metadata), fh, indent=1)


def load_checkpoint(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
