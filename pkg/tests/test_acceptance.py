"""Acceptance suite: each test runs one criterion at its stated tolerance and
records a single PASS/FAIL line, repeated in the pytest terminal summary."""
import math
import time

import numpy as np
import pytest
from scipy import stats

from mixuplab._rng import make_rng
from mixuplab.cli import (
    DEFAULTS,
    run_gen_gap,
    run_rademacher,
    run_robustness,
    run_theorem_check,
    run_track_r,
    run_validate_adv_approx,
    run_validate_approx,
)
from mixuplab.data import Dataset, center, gen_gaussian_halfspace, gen_two_moons
from mixuplab.distributions import (
    derive_mixture,
    moment_one_minus_lambda,
    moment_one_minus_lambda_sq,
    moment_ratio_sq,
    sample_bernoulli_then_lambda,
    sample_lambda_then_bernoulli,
    sample_mixture,
)
from mixuplab.losses import MixupConfig, approx_mixup_loss, empirical_loss, mixup_loss_mc, mixup_loss_resampled
from mixuplab.models import LOGISTIC, init_linear, init_two_layer
from mixuplab.training import TrainConfig, finite_diff_check, make_objective, train


def config(command, **overrides):
    return {**DEFAULTS[command], **overrides}


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def test_criterion_01_mixture_moments(record_criterion):
    failures = []
    with Timer() as t:
        for k, shape in enumerate([(1, 1), (2, 2), (5, 0.5), (20, 0.5)]):
            mix = derive_mixture(shape)
            lam = sample_mixture(mix, make_rng([101, k]), 1_000_000)
            checks = {"E[1-lam]": (1 - lam, moment_one_minus_lambda(mix)),
                      "E[(1-lam)^2]": ((1 - lam) ** 2, moment_one_minus_lambda_sq(mix))}
            if min(shape) > 1:
                checks["E[(1-lam)^2/lam^2]"] = ((1 - lam) ** 2 / lam ** 2, moment_ratio_sq(mix))
            for name, (samples, exact) in checks.items():
                se = samples.std(ddof=1) / math.sqrt(samples.size)
                if abs(samples.mean() - exact) > 3 * se:
                    failures.append(f"{shape} {name}")
    ok = not failures and t.seconds < 10
    record_criterion(1, ok, f"moments within 3 SE of 1e6 draws ({t.seconds:.1f}s) {failures or ''}")
    assert ok


def test_criterion_02_conjugacy(record_criterion):
    pvalues = []
    for k, (a, b) in enumerate([(1, 1), (2, 5), (0.5, 0.5), (5, 0.5), (20, 0.5)]):
        lam1, b1 = sample_lambda_then_bernoulli((a, b), make_rng([202, k]), 100_000)
        lam2, b2 = sample_bernoulli_then_lambda((a, b), make_rng([203, k]), 100_000)
        for flag in (0, 1):
            target = stats.beta(a + flag, b + 1 - flag).cdf
            pvalues.append(stats.kstest(lam1[b1 == flag], target).pvalue)
            pvalues.append(stats.ks_2samp(lam1[b1 == flag], lam2[b2 == flag]).pvalue)
    ok = min(pvalues) > 0.01
    record_criterion(2, ok, f"conjugacy KS tests, min p-value {min(pvalues):.3f} > 0.01")
    assert ok


def test_criterion_03_estimator_identity(record_criterion):
    rng = make_rng(303)
    worst = 0.0
    with Timer() as t:
        for k in range(50):
            n, d = int(rng.integers(2, 40)), int(rng.integers(1, 8))
            shape = (float(rng.uniform(0.3, 10)), float(rng.uniform(0.3, 10)))
            ds = gen_gaussian_halfspace(n, d, k)
            model = init_linear(d, k) if k % 2 else init_two_layer(d, int(rng.integers(2, 20)), k)
            mc, se_mc = mixup_loss_mc(model, LOGISTIC, ds, MixupConfig(shape, pair_count=100_000, seed=k))
            rs, se_rs = mixup_loss_resampled(model, LOGISTIC, ds, derive_mixture(shape), 100_000, seed=k + 1)
            worst = max(worst, abs(mc - rs) / math.hypot(se_mc, se_rs))
    ok = worst <= 3 and t.seconds < 120
    record_criterion(3, ok, f"MC vs resampled, worst gap {worst:.2f} combined SE ({t.seconds:.1f}s)")
    assert ok


def test_criterion_04_approximation_tracking(record_criterion):
    with Timer() as t:
        uniform = run_validate_approx(config("validate-approx", tolerance_linear=0.25, tolerance_net=None))
        skewed = run_validate_approx(config("validate-approx", alpha=20.0, beta=0.5,
                                            tolerance_linear=0.05, tolerance_net=0.10))
    parts = {"linear (1,1) <=25%": uniform.checks["tracking_linear"],
             "linear (20,0.5) <=5%": skewed.checks["tracking_linear"],
             "net (20,0.5) <=10%": skewed.checks["tracking_net"]}
    gaps = (f"max gaps: linear(1,1) {uniform.summary['max_rel_gap_linear']:.3f}, "
            f"net(1,1) {uniform.summary['max_rel_gap_net']:.3f}, "
            f"linear(20,0.5) {skewed.summary['max_rel_gap_linear']:.3f}, "
            f"net(20,0.5) {skewed.summary['max_rel_gap_net']:.3f}")
    ok = all(parts.values()) and t.seconds < 300
    failed = [k for k, v in parts.items() if not v]
    record_criterion(4, ok, f"approximation tracking; {gaps}; failed {failed} ({t.seconds:.0f}s)")
    assert ok


def test_criterion_05_06_theorem_chains(record_criterion):
    with Timer() as t:
        report = run_theorem_check(config("theorem-check"))
    fails = report.summary["failures"]
    ok5 = report.checks["chain_linear"] and t.seconds < 120
    ok6 = report.checks["chain_net"] and t.seconds < 300
    record_criterion(5, ok5, f"linear chain holds in 100 trials, failures {fails['linear']} ({t.seconds:.0f}s total)")
    record_criterion(6, ok6, f"ReLU-net chain holds in 25 trials, failures {fails['net']}")
    assert ok5 and ok6


def test_criterion_07_adversarial_surrogate(record_criterion):
    with Timer() as t:
        report = run_validate_adv_approx(config("validate-adv-approx"))
    gap = report.summary["max_rel_gap_after_epoch_1"]
    ok = report.checks["surrogate_within_tolerance"] and t.seconds < 120
    record_criterion(7, ok, f"max relative surrogate gap after epoch 1 = {gap:.3f} <= 0.10 ({t.seconds:.0f}s)")
    assert ok


def test_criterion_08_r_growth(record_criterion):
    with Timer() as t:
        report = run_track_r(config("track-r"))
    ratios = {kind: [round(s["ratio"], 1) for s in report.summary["per_seed"] if s["model"] == kind]
              for kind in ("linear", "net")}
    ok = report.checks["r_growth_majority_linear"] and report.checks["r_growth_majority_net"] and t.seconds < 300
    record_criterion(8, ok, f"R growth ratios linear {ratios['linear']} (need >=10), "
                            f"net {ratios['net']} (need >=100); majority linear "
                            f"{report.checks['r_growth_majority_linear']}, net "
                            f"{report.checks['r_growth_majority_net']} ({t.seconds:.0f}s)")
    assert ok


def test_criterion_09_fgsm_robustness(record_criterion):
    with Timer() as t:
        report = run_robustness(config("robustness"))
    mean = report.summary["mean_accuracy"]
    ok = report.checks["clean_accuracy"] and report.checks["mixup_at_least_erm"] and t.seconds < 300
    record_criterion(9, ok, f"FGSM accuracy mixup {np.round(mean['mixup_mc'], 3).tolist()} >= "
                            f"erm {np.round(mean['erm'], 3).tolist()} ({t.seconds:.0f}s)")
    assert ok


def test_criterion_10_generalization_gap(record_criterion):
    with Timer() as t:
        report = run_gen_gap(config("gen-gap"))
    gap = report.summary["mean_gap"]
    ok = report.checks["mixup_gap_at_most_erm"] and t.seconds < 300
    record_criterion(10, ok, f"mean gap mixup {gap['mixup_mc']:.4f} <= erm {gap['erm']:.4f} ({t.seconds:.0f}s)")
    assert ok


def test_criterion_11_rademacher(record_criterion):
    with Timer() as t:
        report = run_rademacher(config("rademacher"))
    ok = report.checks["bound_sound"] and report.checks["mc_matches_exhaustive"] and t.seconds < 60
    record_criterion(11, ok, f"bound never exceeded and MC matches exhaustive on 20 configs ({t.seconds:.1f}s)")
    assert ok


def test_criterion_12_gradient_checks(record_criterion):
    rng = make_rng(1212)
    worst = {"linear": 0.0, "net": 0.0}
    used_net = 0
    with Timer() as t:
        for k in range(100):
            n, d = int(rng.integers(3, 30)), int(rng.integers(1, 6))
            shape = (float(rng.uniform(1.1, 8)), float(rng.uniform(1.1, 8)))
            ds = center(gen_gaussian_halfspace(n, d, k))
            batch = (ds.inputs, ds.targets)
            mixup = MixupConfig(shape)
            for objective in ("erm", "mixup_approx", "glm_approx"):
                res = finite_diff_check(init_linear(d, k), LOGISTIC,
                                        make_objective(objective, LOGISTIC, ds.inputs, mixup), batch)
                worst["linear"] = max(worst["linear"], res.max_rel_error)
            net = init_two_layer(d, int(rng.integers(2, 12)), k)
            for objective in ("erm", "mixup_approx", "manifold_mixup_approx"):
                res = finite_diff_check(net, LOGISTIC, make_objective(objective, LOGISTIC, ds.inputs, mixup), batch)
                used_net += res.used
                if res.used:
                    worst["net"] = max(worst["net"], res.max_rel_error)
    ok = worst["linear"] <= 1e-6 and worst["net"] <= 1e-4 and used_net > 0 and t.seconds < 60
    record_criterion(12, ok, f"finite differences: linear {worst['linear']:.1e} <= 1e-6, "
                             f"net {worst['net']:.1e} <= 1e-4 ({t.seconds:.1f}s)")
    assert ok


def test_criterion_13_degenerate_exactness(record_criterion):
    point = Dataset(np.array([[0.7, -1.2, 0.4]]), np.array([1.0]))
    errors = []
    for model in (init_linear(3, 5), init_two_layer(3, 7, 5)):
        standard = empirical_loss(model, LOGISTIC, point)
        mixed, _ = mixup_loss_mc(model, LOGISTIC, point, MixupConfig((2, 3), pair_count=1000))
        bd = approx_mixup_loss(model, LOGISTIC, point, derive_mixture((2, 3)))
        errors += [abs(mixed - standard), abs(bd.r1), abs(bd.r2), abs(bd.r3)]
    moons = center(gen_two_moons(60, 0.1, 0))
    erm = TrainConfig(epochs=10, seed=1)
    hooked = TrainConfig(epochs=10, seed=1, objective="mixup_mc", mixup=MixupConfig((1, 1), fixed_lambda=1.0))
    identical = all(
        np.array_equal(train(make(), LOGISTIC, moons, None, erm)[0].params(),
                       train(make(), LOGISTIC, moons, None, hooked)[0].params())
        for make in (lambda: init_linear(2, 3), lambda: init_two_layer(2, 8, 3)))
    ok = max(errors) <= 1e-12 and identical
    record_criterion(13, ok, f"single point max deviation {max(errors):.1e} <= 1e-12; "
                             f"lambda=1 hook bit-identical to ERM: {identical}")
    assert ok
