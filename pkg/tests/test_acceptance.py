"""The twelve acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed together in the
terminal summary.
"""
import filecmp
import itertools
import math
import time

import numpy as np
import pytest
import scipy.fft
from scipy import integrate

from hermlil.cli import main
from hermlil.covariance import FgnIncrements, breuer_major_sigma2, partial_sum_variance, partial_sum_variances
from hermlil.distances import (
    comparison_rhs,
    theta_bound_sequence,
    wasserstein_assignment,
    wasserstein_bruteforce,
    wasserstein_sorted,
)
from hermlil.experiments import (
    ExperimentConfig,
    run_assumption_audit,
    run_comparison_check,
    run_distance_decay,
    run_variance_table,
)
from hermlil.sampler import build_plan, sample_ensemble
from hermlil.stein import (
    TestFunction,
    iid_stein_aggregate,
    polynomial_dictionary,
    rademacher_smoothed,
    stein_factor_density,
    stein_identity_residual,
    uniform_density,
)


def test_01_theta_recursion(acceptance):
    t0 = time.perf_counter()
    b = theta_bound_sequence(10**6)
    elapsed = time.perf_counter() - t0
    d = np.arange(1, b.size + 1)
    worst = float(np.max(b - np.sqrt(2 * np.log(d + 1))))
    b1_err = abs(b[0] - 1 / math.sqrt(2 * math.pi))
    ok = worst <= 0 and b1_err <= 1e-12 and elapsed < 1.0
    acceptance(1, ok, f"max(b_d - sqrt(2 log(d+1))) = {worst:.3e}, |b_1 - 1/sqrt(2pi)| = {b1_err:.1e}, "
                      f"{elapsed:.2f}s")


def test_02_comparison_constant(acceptance):
    c = comparison_rhs(1, 1.0)
    target = 3 * math.log(2) ** 0.25
    ok = abs(c - target) <= 1e-12 and round(c, 3) == 2.737
    acceptance(2, ok, f"comparison_rhs(1, 1) = {c:.15f}, 3 (log 2)^(1/4) = {target:.15f}")


def test_03_critical_variance_law(acceptance):
    t0 = time.perf_counter()
    rep = run_variance_table(ExperimentConfig(q=2, H=0.75, ns=tuple(2**e for e in range(10, 23))))
    elapsed = time.perf_counter() - t0
    worst = max(rep.rows, key=lambda r: r["deviation"] * math.log(r["n"]))
    ok = all(r["deviation"] <= 3 / math.log(r["n"]) for r in rep.rows) and elapsed < 30
    acceptance(3, ok, f"max |ratio-1| log n = {worst['dev_log_n']:.5f} at n = {worst['n']} "
                      f"(bound 3), {elapsed:.1f}s")


def test_04_breuer_major_variance(acceptance):
    model, n = FgnIncrements(0.3), 10**5
    s2 = breuer_major_sigma2(model, 2, tol=1e-8)
    rel = abs(partial_sum_variance(model, 2, n) / n - s2) / s2

    def truncated(K):
        return 2 * (1 + 2 * math.fsum(model.rho(np.arange(1, K + 1)) ** 2))

    K = 10**6
    gap = abs(truncated(2 * K) - truncated(K))
    ok = rel <= 0.05 and gap < 1e-8 and abs(truncated(2 * K) - s2) < 1e-8
    acceptance(4, ok, f"sigma^2 = {s2:.12f}, relative deviation at 1e5 = {rel:.2e}, "
                      f"truncation gap K={K}: {gap:.1e}")


def test_05_sampler_validity(acceptance):
    M, n, lags = 10**4, 64, 21
    worst_cov, worst_eig = 0.0, math.inf
    for H in (0.3, 0.5, 0.75):
        model = FgnIncrements(H)
        plan = build_plan(model, n)
        m = plan.embedding_size
        row = model.rho(np.minimum(np.arange(m), m - np.arange(m)))
        raw = scipy.fft.fft(row).real
        worst_eig = min(worst_eig, raw.min() / raw.max())
        Z = sample_ensemble(plan, 5, M).values
        emp = np.array([np.mean(Z[:, : n - k] * Z[:, k:]) for k in range(lags)])
        worst_cov = max(worst_cov, float(np.max(np.abs(emp - model.rho(np.arange(lags))))))
    ok = worst_cov <= 5 / math.sqrt(M) and worst_eig >= -1e-10
    acceptance(5, ok, f"max autocovariance error {worst_cov:.4f} (tol {5 / math.sqrt(M):.3f}), "
                      f"min eigenvalue / max = {worst_eig:.2e}")


def test_06_wasserstein_oracles(acceptance):
    rng = np.random.default_rng(6)
    brute_err = 0.0
    for trial in range(100):
        m = int(rng.integers(1, 9))
        a, b = rng.standard_normal(m), rng.standard_normal(m) * 2 + 0.5
        for theta in (1.0, 2.0):
            brute_err = max(brute_err, abs(wasserstein_sorted(a, b, theta).value - wasserstein_bruteforce(a, b, theta)))
    assign_err = 0.0
    for m in (1, 2, 8, 64, 256, 512):
        a, b = rng.standard_normal(m), rng.standard_cauchy(m)
        assign_err = max(assign_err, abs(wasserstein_assignment(a, b).value - wasserstein_sorted(a, b, 1).value))
    two_point = wasserstein_assignment([[0, 0], [1, 0]], [[0, 0], [0, 1]]).value
    ok = brute_err <= 1e-12 and assign_err <= 1e-12 and abs(two_point - math.sqrt(2) / 2) <= 1e-12
    acceptance(6, ok, f"sorted vs brute force {brute_err:.1e}, assignment vs sorted {assign_err:.1e}, "
                      f"two-point {two_point:.12f}")


def test_07_stein_identity(acceptance):
    rng = np.random.default_rng(7)
    N = 200_000
    worst = 0.0  # largest |residual| / SE over the cases that must hold

    def check(F, tau, d):
        nonlocal worst
        for fn in polynomial_dictionary(d):
            res, se = stein_identity_residual(F, tau, fn)
            worst = max(worst, float(np.max(np.abs(res) / np.maximum(se, 1e-300))))

    # Gaussian vector with identity Stein matrix
    F = rng.standard_normal((N, 3))
    check(F, np.broadcast_to(np.eye(3), (N, 3, 3)), 3)
    # uniform i.i.d. aggregate
    dens = uniform_density()
    a, b = dens.support
    mean_s = integrate.quad(lambda x: dens.pdf(x) * stein_factor_density(dens, x), a, b)[0]
    s_err = max(abs(stein_factor_density(dens, x) - (3 - x * x) / 2) for x in np.linspace(a, b, 41))
    z = rng.uniform(a, b, (N, 8))
    check(z.sum(axis=1) / math.sqrt(8), iid_stein_aggregate(z, dens, 0, 8), 1)
    # Rademacher-smoothed sum
    for n in (1, 4, 32):
        check(*rademacher_smoothed(n, N, rng), 1)
    # negative control: tau scaled by 1.5, probed with g(x) = x_1
    G = rng.standard_normal((N, 2))
    res, se = stein_identity_residual(G, 1.5 * np.broadcast_to(np.eye(2), (N, 2, 2)), TestFunction("x", 0))
    control = abs(res[0]) / se[0]
    ok = worst <= 4 and abs(mean_s - 1) <= 1e-8 and s_err <= 1e-8 and control > 4
    acceptance(7, ok, f"max |residual|/SE = {worst:.2f}, E[s] - 1 = {mean_s - 1:.1e}, "
                      f"s(x) error {s_err:.1e}, corrupted tau at {control:.0f} SE")


@pytest.mark.slow
def test_08_stein_kolmogorov_domination(acceptance):
    rep = run_distance_decay(ExperimentConfig(q=2, H=0.75, M=2000, seed=8, decay_ns=(2**8, 2**11, 2**14)))
    detail = "; ".join(f"n={r['n']}: d_K {r['d_K']:.4f} <= {r['threshold']:.4f}" for r in rep.rows)
    acceptance(8, rep.passed, detail + f"; bound decreasing: {rep.summary['stein_bound_decreasing']}")


@pytest.mark.slow
def test_09_comparison_inequality(acceptance):
    rep = run_comparison_check(ExperimentConfig(q=2, H=0.75, seed=9, comparison_dims=(1, 2, 3),
                                                comparison_points=256, comparison_reps=20))
    frac = rep.summary["pass_fraction"]
    ok = all(frac[str(d)] >= 0.95 for d in (1, 2, 3))
    acceptance(9, ok, "pass fractions " + ", ".join(f"d={d}: {v:.2f}" for d, v in frac.items()))


@pytest.mark.slow
def test_10_cross_covariance_and_w1_growth(acceptance):
    rep = run_assumption_audit(ExperimentConfig(q=2, H=0.75, q_ratio=1.2, alpha=0.3, d=3,
                                                m_range=(4, 5, 6, 7, 8), seed=10))
    comps = {c.name: c for c in rep.components}
    cross, w1 = comps["cross-cov"], comps["A4-stein-w1"]
    fc, fw = cross.summary["fitted"]["all"], w1.summary["fitted"]["all"]
    ok = cross.passed and w1.passed
    acceptance(10, ok, f"cross-cov C = {fc['C_fit']:.3f} (max/min {fc['max_over_min']:.2f}); "
                       f"stein_w1 C = {fw['C_fit']:.3f} (max/min {fw['max_over_min']:.2f})")


def test_11_regime_b_negative_control(acceptance):
    ns = np.array([2**e for e in range(16, 23)])
    var = partial_sum_variances(FgnIncrements(0.9), 2, int(ns.max()))[ns - 1]
    dev = np.abs(var / (0.5625 * ns * np.log(ns)) - 1)
    rep = run_variance_table(ExperimentConfig(H=0.9))
    ok = bool(np.all(dev > 3 / np.log(ns))) and not rep.passed
    acceptance(11, ok, f"deviations {dev.min():.0f}..{dev.max():.0f} vs bounds <= {3 / np.log(ns.min()):.3f}; "
                       f"audit verdict {'FAIL' if not rep.passed else 'PASS'}")


SUBCOMMANDS = ["variance-table", "cross-cov", "distance-decay", "comparison", "lil-trajectory", "audit", "simulate"]


def test_12_cli_determinism(acceptance, tmp_path):
    cfg = tmp_path / "small.ini"
    cfg.write_text("[experiment]\nM = 100\ndecay_ns = 64, 512\ncomparison_reps = 2\ncomparison_points = 64\n"
                   "lil_N = 4096\nlil_replicates = 2\nm_range = 4, 5, 6\nsimulate_n = 32\nsimulate_M = 3\n")
    mismatches = []
    for cmd, fmt in itertools.product(SUBCOMMANDS, ("csv", "json")):
        dirs = [tmp_path / f"{cmd}-{fmt}-{k}" for k in (0, 1)]
        for d in dirs:
            main([cmd, "--config", str(cfg), "--seed", "12", "--format", fmt, "--out", str(d)])
        files = sorted(p.name for p in dirs[0].iterdir())
        _, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], files, shallow=False)
        if mismatch or errors or not files:
            mismatches.append(f"{cmd}/{fmt}")
    ok = not mismatches
    acceptance(12, ok, f"{len(SUBCOMMANDS)} subcommands x 2 formats byte-identical"
                       + (f"; mismatches: {mismatches}" if mismatches else ""))
