"""Synthetic datasets, centering, splitting and CSV persistence."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import box_muller, make_rng
from .errors import EmptyDataset, InvalidCount, InvalidFraction, MalformedRow

CENTER_TOL = 1e-10


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    centered: bool = False
    input_mean: np.ndarray | None = None
    seed: int | None = None
    source: str = "csv"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.targets, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise MalformedRow(f"{X.shape[0]} input rows but {y.shape[0]} targets")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def p(self) -> int:
        return self.inputs.shape[1]

    def __len__(self):
        return self.n

    def subset(self, idx) -> "Dataset":
        return replace(self, inputs=self.inputs[idx], targets=self.targets[idx])


def require_nonempty(dataset: Dataset) -> None:
    if dataset.n == 0:
        raise EmptyDataset("dataset has no rows")


def is_centered(dataset: Dataset, tol: float = CENTER_TOL) -> bool:
    return dataset.n > 0 and bool(np.all(np.abs(dataset.inputs.mean(axis=0)) <= tol))


def gen_two_moons(n: int = 200, noise_sd: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaving half circles; class 0 is the upper moon on the unit circle."""
    if n < 2 or n % 2:
        raise InvalidCount(f"two-moons needs an even n >= 2, got {n}")
    if noise_sd < 0:
        raise InvalidCount("noise_sd must be nonnegative")
    half = n // 2
    t = np.linspace(0.0, math.pi, half)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    X = np.vstack([upper, lower])
    if noise_sd > 0:
        X = X + noise_sd * box_muller(make_rng(seed), X.shape)
    y = np.concatenate([np.zeros(half), np.ones(half)])
    return Dataset(X, y, seed=seed, source="two_moons", metadata={"noise_sd": noise_sd})


def gen_gaussian_halfspace(n: int = 100, d: int = 10, seed: int = 0, centered: bool = False) -> Dataset:
    """x_i ~ N(0, I_d), y_i = 1{x_i . theta_star > 0}, theta_star ~ N(0, I_d) drawn first.

    With ``centered=True`` the inputs are centered *before* labelling, so the
    result is centered and still separable by a hyperplane through the origin.
    """
    if n < 1 or d < 1:
        raise InvalidCount(f"need n, d >= 1, got n={n}, d={d}")
    rng = make_rng(seed)
    theta_star = box_muller(rng, d)
    X = box_muller(rng, (n, d))
    mean = None
    if centered:
        mean = X.mean(axis=0)
        X = X - mean
        X = X - X.mean(axis=0)
    y = (X @ theta_star > 0).astype(float)
    return Dataset(X, y, centered=centered, input_mean=mean, seed=seed, source="gaussian_halfspace",
                   metadata={"theta_star": theta_star.tolist()})


def center(dataset: Dataset) -> Dataset:
    mean = dataset.inputs.mean(axis=0)
    X = dataset.inputs - mean
    # one refinement pass removes the residual rounding of the first subtraction
    X = X - X.mean(axis=0)
    prior = dataset.input_mean if dataset.input_mean is not None else np.zeros(dataset.p)
    return replace(dataset, inputs=X, centered=True, input_mean=prior + mean)


def split(dataset: Dataset, train_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0.0 < train_fraction < 1.0:
        raise InvalidFraction(f"train_fraction must lie in (0, 1), got {train_fraction}")
    perm = make_rng(seed).permutation(dataset.n)
    cut = int(math.floor(dataset.n * train_fraction))
    return dataset.subset(np.sort(perm[:cut])), dataset.subset(np.sort(perm[cut:]))


def save_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{k}" for k in range(dataset.p)] + ["y"])
        for row, target in zip(dataset.inputs, dataset.targets):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def load_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MalformedRow(f"{path}: empty file, expected a header line")
    header = rows[0]
    if not header or header[-1] != "y" or header[:-1] != [f"x_{k}" for k in range(len(header) - 1)]:
        raise MalformedRow(f"{path}: header must be x_0,...,x_(p-1),y; got {header}")
    p = len(header) - 1
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != p + 1:
            raise MalformedRow(f"{path}:{lineno}: expected {p + 1} cells, got {len(row)}")
        try:
            values.append([float(cell) for cell in row])
        except ValueError as exc:
            raise MalformedRow(f"{path}:{lineno}: {exc}") from None
    arr = np.array(values, dtype=float).reshape(-1, p + 1)
    return Dataset(arr[:, :p], arr[:, p], source="csv")


def save_metadata(dataset: Dataset, path) -> None:
    doc = {
        "source": dataset.source,
        "seed": dataset.seed,
        "n": dataset.n,
        "p": dataset.p,
        "centered": dataset.centered,
        "input_mean": None if dataset.input_mean is None else dataset.input_mean.tolist(),
        **dataset.metadata,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
