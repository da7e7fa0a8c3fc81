"""Command-line driver for the desk-scale experiments.

Every command resolves its configuration (built-in defaults, then an optional
JSON config file, then command-line flags), runs, and writes to ``--out``:

* ``resolved_config.json`` -- every parameter actually used;
* one or more plot-ready CSV files (columns documented in the README);
* ``summary.json`` -- headline numbers, the seeds used and pass/fail per check.

Nothing time-dependent is written, so reruns are byte-identical.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 a hard
invariant (theorem chain, complexity-bound soundness) failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import make_rng
from .adversarial import exact_l2_adv_loss_linear, quad_adv_loss_glm, robust_accuracy
from .data import Dataset, center, gen_gaussian_halfspace, gen_two_moons, save_csv, save_metadata
from .distributions import BetaParams, derive_mixture
from .errors import ConfigError, EulerIdentityViolated, MixupLabError, NotInTheta
from .generalization import (
    estimate_rademacher_ball,
    estimate_rho,
    exhaustive_rademacher_ball,
    generalization_gap,
    glm_class_radius,
    rademacher_bound_glm,
    whitened_inputs,
)
from .losses import MixupConfig, approx_mixup_loss, empirical_loss, mixup_loss_mc
from .models import LOGISTIC, init_linear, init_two_layer
from .theorems import REPORT_CSV_COLUMNS, check_theorem_linear, check_theorem_net, in_theta_region
from .training import OBJECTIVES, TrainConfig, accuracy, train

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4

_COMMON = {"seed": 0, "lr": 0.1, "momentum": 0.9, "batch_size": 64, "weight_decay": 0.0}

DEFAULTS: dict[str, dict] = {
    "validate-approx": {**_COMMON, "alpha": 1.0, "beta": 1.0, "epochs": 200, "n": 200, "noise": 0.1,
                        "hidden": 50, "models": ["linear", "net"], "log_every": 10, "mc_draws": 100_000,
                        "objective_pairs": 10_000, "tolerance_linear": 0.25, "tolerance_net": None},
    "validate-adv-approx": {**_COMMON, "alpha": 1.0, "beta": 1.0, "epochs": 200, "n": 200, "noise": 0.1,
                            "objective": "erm", "eta": 0.5, "tolerance": 0.10},
    "robustness": {**_COMMON, "alpha": 5.0, "beta": 0.5, "epochs": 400, "n": 100, "d": 10, "hidden": 50,
                   "model": "net", "n_seeds": 5, "eps_grid": [0.05, 0.1, 0.15, 0.2], "eps_scale": 1.0,
                   "min_clean_accuracy": 0.99},
    "track-r": {**_COMMON, "epochs": 400, "n": 100, "d": 10, "hidden": 50, "objective": "erm",
                "n_seeds": 5, "ratio_linear": 10.0, "ratio_net": 100.0, "frac_threshold": 0.5,
                "min_frac_net": 0.10},
    "theorem-check": {**_COMMON, "alpha": None, "beta": None, "linear_trials": 100, "net_trials": 25,
                      "n_range": [20, 200], "d_range": [2, 20], "hidden_range": [5, 60],
                      "shape_range": [0.3, 10.0], "max_epochs": 20_000, "tolerance": 1e-9},
    "gen-gap": {**_COMMON, "alpha": 1.0, "beta": 1.0, "epochs": 400, "n": 50, "n_test": 1000, "d": 10,
                "model": "linear", "hidden": 50, "n_seeds": 10},
    "rademacher": {"seed": 0, "n_configs": 20, "n_range": [4, 12], "d_range": [1, 6],
                   "gamma_range": [0.01, 10.0], "mc_draws": 4000, "rho_draws": 2000},
    "gen-data": {"seed": 0, "source": "gaussian_halfspace", "n": 100, "d": 10, "noise": 0.1, "centered": False},
}

# flag name -> config key
FLAGS = {"seed": "seed", "alpha": "alpha", "beta": "beta", "epochs": "epochs", "lr": "lr",
         "momentum": "momentum", "objective": "objective", "eps_grid": "eps_grid", "n": "n", "d": "d",
         "noise": "noise"}


@dataclass
class Report:
    tables: dict = field(default_factory=dict)   # file name -> (columns, rows)
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)   # check name -> bool
    hard_checks: tuple = ()
    seeds: list = field(default_factory=list)

    @property
    def hard_failure(self) -> bool:
        return any(not self.checks[name] for name in self.hard_checks)


# ---------------------------------------------------------------------------
# configuration


def resolve_config(command: str, file_cfg: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults <- config file <- flag overrides; unknown keys are a ConfigError."""
    if command not in DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    cfg = dict(DEFAULTS[command])
    for source in (file_cfg or {}, overrides or {}):
        for key, value in source.items():
            if key not in cfg:
                raise ConfigError(f"{command} does not accept the parameter {key!r}")
            cfg[key] = value
    _validate(command, cfg)
    return cfg


def _validate(command: str, cfg: dict) -> None:
    def positive(*keys):
        for k in keys:
            if k in cfg and cfg[k] is not None and not cfg[k] > 0:
                raise ConfigError(f"{k} must be positive, got {cfg[k]!r}")

    positive("alpha", "beta", "epochs", "lr", "n", "d", "n_seeds", "mc_draws", "hidden", "eta")
    if "momentum" in cfg and not 0.0 <= cfg["momentum"] < 1.0:
        raise ConfigError("momentum must lie in [0, 1)")
    if cfg.get("objective") is not None and "objective" in DEFAULTS[command] and cfg["objective"] not in OBJECTIVES:
        raise ConfigError(f"unknown objective {cfg['objective']!r}; choose from {OBJECTIVES}")
    if "eps_grid" in cfg and any(e < 0 for e in cfg["eps_grid"]):
        raise ConfigError("eps_grid entries must be nonnegative")
    if command == "gen-data" and cfg["source"] not in ("two_moons", "gaussian_halfspace"):
        raise ConfigError(f"unknown data source {cfg['source']!r}")
    if cfg.get("model") is not None and cfg["model"] not in ("linear", "net"):
        raise ConfigError(f"model must be 'linear' or 'net', got {cfg['model']!r}")
    if int(cfg.get("seed", 0)) < 0:
        raise ConfigError("seed must be a nonnegative integer")


def _train_config(cfg: dict, seed: int, objective: str, mixup: MixupConfig | None = None, **kw) -> TrainConfig:
    return TrainConfig(learning_rate=cfg["lr"], momentum=cfg["momentum"], epochs=int(cfg["epochs"]),
                       batch_size=int(cfg["batch_size"]), weight_decay=cfg["weight_decay"], seed=seed,
                       objective=objective, mixup=mixup, **kw)


def _init(kind: str, p: int, hidden: int, seed: int):
    return init_linear(p, seed) if kind == "linear" else init_two_layer(p, hidden, seed)


def _centered_moons(n: int, noise: float, seed: int) -> tuple[Dataset, Dataset]:
    """Centered two-moons training set and an independent test set shifted by the training mean."""
    train_set = center(gen_two_moons(n, noise, seed))
    raw_test = gen_two_moons(n, noise, seed + 1)
    test_set = Dataset(raw_test.inputs - train_set.input_mean, raw_test.targets, seed=seed + 1,
                       source="two_moons", metadata=raw_test.metadata)
    return train_set, test_set


# ---------------------------------------------------------------------------
# experiments


def run_validate_approx(cfg: dict) -> Report:
    """Mixup loss versus its second-order approximation on two-moons.

    Two artifacts: (i) paired curves -- each model trained once per objective
    from the same initialization, logging its own objective; (ii) tracking --
    along the mixup_mc trajectory, a 10^5-draw Monte Carlo Mixup loss and the
    approximation evaluated at the same parameters.
    """
    seed = int(cfg["seed"])
    shape = BetaParams(cfg["alpha"], cfg["beta"])
    mix = derive_mixture(shape)
    train_set, test_set = _centered_moons(int(cfg["n"]), cfg["noise"], seed)
    curves, tracking = [], []
    summary, checks = {}, {}
    for kind in cfg["models"]:
        init = _init(kind, 2, int(cfg["hidden"]), seed)
        snaps = []
        for objective in ("mixup_mc", "mixup_approx"):
            mixup = MixupConfig(shape, pair_count=int(cfg["objective_pairs"]), seed=seed)
            tc = _train_config(cfg, seed, objective, mixup, log_every=int(cfg["log_every"]), log_objective=True)
            hook = None
            if objective == "mixup_mc":
                def hook(epoch, model, every=int(cfg["log_every"])):
                    if epoch % every == 0 or epoch == tc.epochs:
                        snaps.append((epoch, model))
            _, log = train(init, LOGISTIC, train_set, test_set, tc, on_epoch=hook)
            for rec in log.records:
                curves.append([kind, objective, rec["epoch"], rec["train_objective"], rec["test_objective"],
                               rec["train_loss"], rec["test_loss"]])
        tol = cfg[f"tolerance_{kind}"]
        gaps, oks = [], []
        for epoch, model in snaps:
            mc, se = mixup_loss_mc(model, LOGISTIC, train_set,
                                   MixupConfig(shape, pair_count=int(cfg["mc_draws"]), seed=seed + 1))
            approx = approx_mixup_loss(model, LOGISTIC, train_set, mix).total
            rel = abs(mc - approx) / abs(approx)
            ok = tol is None or abs(mc - approx) <= max(tol * abs(approx), 3.0 * se)
            gaps.append(rel)
            oks.append(ok)
            tracking.append([kind, epoch, mc, se, approx, rel, int(ok)])
        summary[f"max_rel_gap_{kind}"] = max(gaps)
        if tol is not None:
            checks[f"tracking_{kind}"] = all(oks)
    return Report(tables={"fig2_data.csv": (["model", "objective", "epoch", "train_objective", "test_objective",
                                             "train_loss", "test_loss"], curves),
                          "fig2_tracking.csv": (["model", "epoch", "mix_mc", "mix_mc_se", "approx", "rel_gap",
                                                 "within_tolerance"], tracking)},
                  summary=summary, checks=checks, seeds=[seed, seed + 1])


def run_validate_adv_approx(cfg: dict) -> Report:
    """Exact l2 adversarial logistic loss versus its quadratic surrogate along a trajectory."""
    seed = int(cfg["seed"])
    train_set, _ = _centered_moons(int(cfg["n"]), cfg["noise"], seed)
    X, y = train_set.inputs, train_set.targets
    eta = float(cfg["eta"])
    mixup = None if cfg["objective"] == "erm" else MixupConfig(BetaParams(cfg["alpha"], cfg["beta"]), seed=seed)
    rows = []

    def hook(epoch, model):
        clean = empirical_loss(model, LOGISTIC, train_set)
        exact = float(np.mean(exact_l2_adv_loss_linear(model, LOGISTIC, X, y, eta)))
        quad = float(np.mean(quad_adv_loss_glm(model, X, y, eta)))
        rows.append([epoch, eta, clean, exact, quad, abs(exact - quad) / exact])

    train(init_linear(2, seed), LOGISTIC, train_set, None,
          _train_config(cfg, seed, cfg["objective"], mixup, log_every=int(cfg["epochs"])), on_epoch=hook)
    late = [r[5] for r in rows if r[0] > 1]
    max_gap = max(late) if late else float("nan")
    return Report(tables={"fig6_data.csv": (["epoch", "eta", "clean_loss", "exact_adv_loss", "quad_adv_loss",
                                             "rel_gap"], rows)},
                  summary={"max_rel_gap_after_epoch_1": max_gap},
                  checks={"surrogate_within_tolerance": bool(max_gap <= cfg["tolerance"]),
                          "surrogate_above_clean": all(r[4] >= r[2] for r in rows)},
                  seeds=[seed])


def run_robustness(cfg: dict) -> Report:
    """FGSM robust accuracy on the training points of ERM- and Mixup-trained models."""
    base = int(cfg["seed"])
    seeds = [base + k for k in range(int(cfg["n_seeds"]))]
    eps = [cfg["eps_scale"] * e for e in cfg["eps_grid"]]
    shape = BetaParams(cfg["alpha"], cfg["beta"])
    rows, acc = [], {"erm": [], "mixup_mc": []}
    clean_ok = True
    for seed in seeds:
        ds = gen_gaussian_halfspace(int(cfg["n"]), int(cfg["d"]), seed, centered=True)
        init = _init(cfg["model"], ds.p, int(cfg["hidden"]), seed)
        for objective in acc:
            mixup = MixupConfig(shape, seed=seed) if objective != "erm" else None
            model, _ = train(init, LOGISTIC, ds, None,
                             _train_config(cfg, seed, objective, mixup, log_every=int(cfg["epochs"])))
            clean = accuracy(model, ds)
            clean_ok &= clean >= cfg["min_clean_accuracy"]
            recs = robust_accuracy(model, LOGISTIC, ds, eps, seed=seed)
            acc[objective].append([r["accuracy"] for r in recs])
            rows.extend([objective, seed, r["epsilon"], r["accuracy"], clean] for r in recs)
    mean = {k: np.mean(v, axis=0).tolist() for k, v in acc.items()}
    return Report(tables={"robustness.csv": (["objective", "seed", "epsilon", "accuracy", "clean_train_accuracy"],
                                             rows)},
                  summary={"epsilons": eps, "mean_accuracy": mean},
                  checks={"clean_accuracy": bool(clean_ok),
                          "mixup_at_least_erm": all(m >= e for m, e in zip(mean["mixup_mc"], mean["erm"]))},
                  seeds=seeds)


def run_track_r(cfg: dict) -> Report:
    """Growth of the minimal input-gradient cosine R during training on halfspace data."""
    base = int(cfg["seed"])
    seeds = [base + k for k in range(int(cfg["n_seeds"]))]
    hist = [f"r_hist_{k}" for k in range(10)]
    rows, per_seed = [], []
    for kind in ("linear", "net"):
        for seed in seeds:
            ds = gen_gaussian_halfspace(int(cfg["n"]), int(cfg["d"]), seed)
            tc = _train_config(cfg, seed, cfg["objective"], track_r=True)
            _, log = train(_init(kind, ds.p, int(cfg["hidden"]), seed), LOGISTIC, ds, None, tc)
            for rec in log.records:
                rows.append([kind, seed, rec["epoch"], rec["train_accuracy"], rec["r_min"]] + [rec[h] for h in hist])
            first = log.epoch_accuracy_first_100
            r = log.column("r_min")
            final_radii = log.records[-1]["radii"]
            frac = float(np.mean(final_radii > cfg["frac_threshold"]))
            if first is None:
                ratio = float("nan")
            else:
                ratio = float(r[-1] / r[first]) if r[first] > 0 else float("inf")
            passed = first is not None and ratio >= cfg[f"ratio_{kind}"]
            if kind == "net":
                passed = passed and frac >= cfg["min_frac_net"]
            per_seed.append({"model": kind, "seed": seed, "first_full_accuracy_epoch": first,
                             "r_initial": float(r[0]), "r_at_first_full_accuracy": None if first is None else float(r[first]),
                             "r_final": float(r[-1]), "ratio": ratio, "frac_above_threshold": frac,
                             "passed": bool(passed)})
    checks = {}
    for kind in ("linear", "net"):
        wins = sum(s["passed"] for s in per_seed if s["model"] == kind)
        checks[f"r_growth_majority_{kind}"] = wins > len(seeds) / 2
    return Report(tables={"fig3_data.csv": (["model", "seed", "epoch", "train_accuracy", "r_min"] + hist, rows)},
                  summary={"per_seed": per_seed}, checks=checks, seeds=seeds)


def _trial_params(rng, cfg, net: bool) -> dict:
    lo_s, hi_s = cfg["shape_range"]
    return {"n": int(rng.integers(*cfg["n_range"])), "d": int(rng.integers(*cfg["d_range"])),
            "hidden": int(rng.integers(*cfg["hidden_range"])) if net else 0,
            "alpha": float(cfg["alpha"]) if cfg["alpha"] is not None else float(rng.uniform(lo_s, hi_s)),
            "beta": float(cfg["beta"]) if cfg["beta"] is not None else float(rng.uniform(lo_s, hi_s))}


def run_theorem_check(cfg: dict) -> Report:
    """Random trials of the Mixup >= adversarial-loss chains for linear and bias-free ReLU models.

    Each trial draws centered separable halfspace data, trains by ERM until
    every training point is on the correct side (zero-training-error region),
    then evaluates the chain.
    """
    base = int(cfg["seed"])
    rng = make_rng(base)
    rows, seeds = [], []
    failures = {"linear": 0, "net": 0}
    for kind, count in (("linear", cfg["linear_trials"]), ("net", cfg["net_trials"])):
        for trial in range(int(count)):
            t = _trial_params(rng, cfg, kind == "net")
            seed = base + len(seeds)
            seeds.append(seed)
            ds = gen_gaussian_halfspace(t["n"], t["d"], seed, centered=True)
            tc = _train_config({**cfg, "epochs": cfg["max_epochs"]}, seed, "erm", log_every=int(cfg["max_epochs"]))
            model, _ = train(_init(kind, t["d"], t["hidden"], seed), LOGISTIC, ds, None, tc,
                             stop_when=lambda m, ds=ds: in_theta_region(m, ds))
            check = check_theorem_linear if kind == "linear" else check_theorem_net
            try:
                report = check(model, LOGISTIC, ds, derive_mixture(BetaParams(t["alpha"], t["beta"])),
                               tolerance=cfg["tolerance"])
                row = report.csv_row()
                holds = report.holds_chain
            except (NotInTheta, EulerIdentityViolated) as exc:
                row = [math.nan] * 5 + [0, t["n"], t["d"]]
                holds = False
                t["error"] = type(exc).__name__
            failures[kind] += not holds
            rows.append([kind, trial, seed, t["alpha"], t["beta"], t["hidden"]] + row)
    checks = {f"chain_{k}": failures[k] == 0 for k in failures}
    return Report(tables={"theorem_trials.csv": (["model", "trial", "seed", "alpha", "beta", "hidden"]
                                                 + REPORT_CSV_COLUMNS, rows)},
                  summary={"failures": failures, "trials": {"linear": cfg["linear_trials"], "net": cfg["net_trials"]}},
                  checks=checks, hard_checks=tuple(checks), seeds=seeds)


def run_gen_gap(cfg: dict) -> Report:
    """Test-minus-train logistic loss of ERM- and Mixup-trained models on small training sets."""
    base = int(cfg["seed"])
    seeds = [base + k for k in range(int(cfg["n_seeds"]))]
    n, n_test = int(cfg["n"]), int(cfg["n_test"])
    shape = BetaParams(cfg["alpha"], cfg["beta"])
    rows, gaps = [], {"erm": [], "mixup_mc": []}
    for seed in seeds:
        full = gen_gaussian_halfspace(n + n_test, int(cfg["d"]), seed, centered=True)
        train_set, test_set = full.subset(np.arange(n)), full.subset(np.arange(n, n + n_test))
        init = _init(cfg["model"], full.p, int(cfg["hidden"]), seed)
        for objective in gaps:
            mixup = MixupConfig(shape, seed=seed) if objective != "erm" else None
            model, _ = train(init, LOGISTIC, train_set, None,
                             _train_config(cfg, seed, objective, mixup, log_every=int(cfg["epochs"])))
            gap = generalization_gap(model, LOGISTIC, train_set, test_set)
            gaps[objective].append(gap)
            rows.append([objective, seed, empirical_loss(model, LOGISTIC, train_set),
                         empirical_loss(model, LOGISTIC, test_set), gap])
    mean = {k: float(np.mean(v)) for k, v in gaps.items()}
    return Report(tables={"gen_gap.csv": (["objective", "seed", "train_loss", "test_loss", "gap"], rows)},
                  summary={"mean_gap": mean},
                  checks={"mixup_gap_at_most_erm": mean["mixup_mc"] <= mean["erm"]}, seeds=seeds)


def run_rademacher(cfg: dict) -> Report:
    """Monte Carlo and exhaustive Rademacher complexities of the constrained linear class versus the bound.

    The class {x -> theta.x : theta in the whitened ball of radius
    ``glm_class_radius(gamma, rho)``} contains the gamma-constrained GLM class;
    its complexity is evaluated on whitened inputs.
    """
    base = int(cfg["seed"])
    rng = make_rng(base)
    rows, seeds = [], []
    sound = agree = True
    for k in range(int(cfg["n_configs"])):
        seed = base + k
        seeds.append(seed)
        n = int(rng.integers(cfg["n_range"][0], cfg["n_range"][1] + 1))
        d = int(rng.integers(cfg["d_range"][0], cfg["d_range"][1] + 1))
        gamma = float(rng.uniform(*cfg["gamma_range"]))
        X = center(Dataset(make_rng([seed, 1]).standard_normal((n, d)), np.zeros(n))).inputs
        rho = estimate_rho(X, LOGISTIC, int(cfg["rho_draws"]), seed)
        Xw, rank = whitened_inputs(X)
        radius = glm_class_radius(gamma, rho)
        bound = rademacher_bound_glm(gamma, rho, rank, n)
        mc = estimate_rademacher_ball(Xw, radius, int(cfg["mc_draws"]), seed)
        exact = exhaustive_rademacher_ball(Xw, radius) if n <= 12 else math.nan
        ok_sound = mc.mean <= bound and (math.isnan(exact) or exact <= bound)
        ok_agree = math.isnan(exact) or abs(mc.mean - exact) <= 3.0 * mc.std_error
        sound &= ok_sound
        agree &= ok_agree
        rows.append([k, seed, n, d, rank, gamma, rho, radius, bound, mc.mean, mc.std_error, exact,
                     int(ok_sound), int(ok_agree)])
    checks = {"bound_sound": bool(sound), "mc_matches_exhaustive": bool(agree)}
    return Report(tables={"rademacher.csv": (["config", "seed", "n", "d", "rank", "gamma", "rho_hat", "radius",
                                              "bound", "rad_mc_mean", "rad_mc_se", "rad_exhaustive", "sound",
                                              "agree"], rows)},
                  summary={"n_configs": cfg["n_configs"]}, checks=checks, hard_checks=("bound_sound",), seeds=seeds)


def run_gen_data(cfg: dict) -> Report:
    seed = int(cfg["seed"])
    if cfg["source"] == "two_moons":
        ds = gen_two_moons(int(cfg["n"]), cfg["noise"], seed)
        ds = center(ds) if cfg["centered"] else ds
    else:
        ds = gen_gaussian_halfspace(int(cfg["n"]), int(cfg["d"]), seed, centered=bool(cfg["centered"]))
    # the dataset itself is written by write_outputs, not serialized into the summary
    return Report(summary={"n": ds.n, "p": ds.p, "source": ds.source, "centered": ds.centered,
                           "positive_fraction": float(ds.targets.mean()), "dataset": ds},
                  seeds=[seed])


RUNNERS = {
    "validate-approx": run_validate_approx,
    "validate-adv-approx": run_validate_adv_approx,
    "robustness": run_robustness,
    "track-r": run_track_r,
    "theorem-check": run_theorem_check,
    "gen-gap": run_gen_gap,
    "rademacher": run_rademacher,
    "gen-data": run_gen_data,
}


# ---------------------------------------------------------------------------
# output


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    return value


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer, np.bool_)):
        return int(v)
    return v


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(_jsonable(doc), indent=1, sort_keys=True) + "\n")


def write_outputs(out: Path, command: str, cfg: dict, report: Report) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "resolved_config.json", {"command": command, **cfg})
    for name, (columns, rows) in report.tables.items():
        with open(out / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            writer.writerows([_cell(v) for v in row] for row in rows)
    summary = {k: v for k, v in report.summary.items() if k != "dataset"}
    if "dataset" in report.summary:
        ds = report.summary["dataset"]
        save_csv(ds, out / "data.csv")
        save_metadata(ds, out / "data_meta.json")
    _dump(out / "summary.json", {"command": command, "seeds": report.seeds, "results": summary,
                                 "checks": {k: {"passed": bool(v), "hard": k in report.hard_checks}
                                            for k, v in report.checks.items()},
                                 "passed": all(report.checks.values())})


# ---------------------------------------------------------------------------
# entry point


def _eps_grid(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad epsilon grid {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat JSON file mirroring the flags")
    common.add_argument("--out", type=Path, help="output directory (default: runs/<command>)")
    common.add_argument("--seed", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--epochs", type=int)
    common.add_argument("--lr", type=float)
    common.add_argument("--momentum", type=float)
    common.add_argument("--objective", choices=OBJECTIVES)
    common.add_argument("--eps-grid", dest="eps_grid", type=_eps_grid, help="comma-separated, e.g. 0.05,0.1")
    common.add_argument("--n", type=int)
    common.add_argument("--d", type=int)
    common.add_argument("--noise", type=float)
    common.add_argument("--source", choices=("two_moons", "gaussian_halfspace"), help="gen-data only")
    common.add_argument("--centered", action="store_true", default=None, help="gen-data only")
    parser = argparse.ArgumentParser(prog="mixuplab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in RUNNERS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).splitlines()[0])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    overrides = {k: v for k, v in vars(args).items()
                 if k in (*FLAGS, "source", "centered") and v is not None}
    try:
        file_cfg = {}
        if args.config is not None:
            try:
                file_cfg = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from None
            if not isinstance(file_cfg, dict):
                raise ConfigError("config file must hold a JSON object")
        cfg = resolve_config(args.command, file_cfg, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or Path("runs") / args.command
    try:
        report = RUNNERS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NotInTheta, EulerIdentityViolated) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except MixupLabError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    write_outputs(out, args.command, cfg, report)
    for name, ok in report.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(f"wrote {out}")
    return EXIT_INVARIANT if report.hard_failure else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
