"""Audit runners, report serialisation and the pure re-evaluation of verdicts."""
import json
import math

import numpy as np
import pytest

from hermlil.covariance import FgnIncrements, WhiteNoise, partial_sum_variance
from hermlil.experiments import (
    AuditReport,
    ExperimentConfig,
    evaluate,
    normalized_cross_covariance,
    run_assumption_audit,
    run_comparison_check,
    run_cross_covariance_audit,
    run_distance_decay,
    run_lil_trajectory,
    run_variance_table,
)
from hermlil.hermite import Regime

SMALL = dict(M=200, comparison_reps=2, comparison_points=64, lil_N=2048, lil_replicates=2, lil_grid=10,
             decay_ns=(64, 256), m_range=(4, 5, 6))


def brute_cross(model, q, A, B, ga, gb):
    ka = np.arange(*A)[:, None]
    kb = np.arange(*B)[None, :]
    return math.factorial(q) * float(np.sum(model.rho(kb - ka) ** q)) / (ga * gb)


class TestConfig:
    def test_defaults(self):
        c = ExperimentConfig()
        assert c.ns[0] == 2**10 and c.ns[-1] == 2**22 and len(c.ns) == 13
        assert c.asymptotic_regime() is Regime.CRITICAL

    def test_file_without_section(self, tmp_path):
        f = tmp_path / "c.ini"
        f.write_text("# comment\nH = 0.3\nq = 3\nns = 2^4, 100\nthetas = 2 4\ntail = none\nzero_fill = yes\n")
        c = ExperimentConfig.from_file(f)
        assert (c.H, c.q, c.ns, c.thetas, c.tail, c.zero_fill) == (0.3, 3, (16, 100), (2.0, 4.0), None, True)

    def test_file_with_section(self, tmp_path):
        f = tmp_path / "c.ini"
        f.write_text("[experiment]\nmodel = explicit\nrho = 1, 0.5, 0.25\nseed = 0x10\n")
        c = ExperimentConfig.from_file(f)
        assert c.rho == (1.0, 0.5, 0.25) and c.seed == 16
        assert c.covariance_model().rho(2) == 0.25

    def test_unknown_key(self):
        with pytest.raises(KeyError):
            ExperimentConfig.from_mapping({"nonsense": "1"})

    @pytest.mark.parametrize("kw", [dict(M=0), dict(model="brownian"), dict(normalizer="bogus")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ExperimentConfig(**kw)

    def test_regime_selection(self):
        assert ExperimentConfig(H=0.3).asymptotic_regime() is Regime.BREUER_MAJOR
        assert ExperimentConfig(H=0.9).asymptotic_regime() is Regime.CRITICAL
        assert ExperimentConfig(q=1, H=0.9).asymptotic_regime() is Regime.EXACT
        assert ExperimentConfig(variance_regime="exact").asymptotic_regime() is Regime.EXACT


class TestVarianceTable:
    def test_white_noise_exact_ratio_one(self):
        rep = run_variance_table(ExperimentConfig(model="white", variance_regime="exact"))
        assert rep.passed and all(r["ratio"] == 1.0 for r in rep.rows)

    def test_breuer_major_at_1e5(self):
        rep = run_variance_table(ExperimentConfig(H=0.3, ns=(10**5,)))
        assert rep.summary["regime"] == "breuer_major"
        assert rep.rows[0]["deviation"] <= 0.05

    def test_rows_match_exact_variance(self):
        rep = run_variance_table(ExperimentConfig(ns=(1024, 4096)))
        for r in rep.rows:
            assert r["variance"] == pytest.approx(partial_sum_variance(FgnIncrements(0.75), 2, r["n"]), rel=1e-12)
            assert r["g2"] == pytest.approx(0.5625 * r["n"] * math.log(r["n"]))

    def test_critical_deviation_constant(self):
        # |ratio - 1| log n settles near 3.3798 for q = 2, H = 3/4
        rep = run_variance_table(ExperimentConfig())
        assert rep.summary["fitted_C_log_n"] == pytest.approx(3.37996, abs=1e-4)
        assert rep.rows[-1]["dev_log_n"] == pytest.approx(3.37977, abs=1e-4)

    def test_regime_b_fails(self):
        rep = run_variance_table(ExperimentConfig(H=0.9))
        assert not rep.passed
        assert all(not r["pass"] for r in rep.rows if r["n"] >= 2**16)


class TestCrossCovariance:
    @pytest.mark.parametrize("q,H", [(1, 0.3), (2, 0.75), (3, 0.6)])
    def test_lag_count_formula(self, q, H):
        m = FgnIncrements(H)
        A, B = (5, 23), (31, 60)
        assert normalized_cross_covariance(m, q, A, B, 1.7, 2.1) == pytest.approx(
            brute_cross(m, q, A, B, 1.7, 2.1), rel=1e-12)

    def test_white_noise_zero(self):
        rep = run_cross_covariance_audit(ExperimentConfig(model="white"))
        assert rep.passed and all(r["value"] == 0.0 for r in rep.rows)

    @pytest.mark.parametrize("kw", [dict(), dict(q=1, H=0.3)])
    def test_bounded_product(self, kw):
        rep = run_cross_covariance_audit(ExperimentConfig(**kw))
        assert rep.passed
        assert len(rep.rows) == 5 * 3


class TestEvaluate:
    def test_reevaluation_is_pure(self):
        rep = run_cross_covariance_audit(ExperimentConfig())
        again = AuditReport.from_dict(json.loads(rep.to_json()))
        again.passed = None
        assert evaluate(again) == rep.passed
        assert again.to_json() == rep.to_json()

    def test_tampered_row_flips_verdict(self):
        rep = run_cross_covariance_audit(ExperimentConfig())
        rows = [dict(r) for r in rep.rows]
        rows[-1]["scaled"] = 100.0
        bad = AuditReport(rep.name, rep.columns, rows, rep.rule, rep.params)
        assert rep.passed and not bad.passed

    def test_bounded_growth_rule(self):
        rows = [{"n": n, "scaled": s} for n, s in [(1, 1.0), (2, 1.2), (3, 3.5), (4, 3.7)]]
        rep = AuditReport("t", ["n", "scaled"], rows, "bounded_growth", {"key": "n", "factor": 3.0})
        assert not rep.passed and rows[2]["pass"] and not rows[3]["pass"]

    def test_csv_layout(self):
        rep = run_variance_table(ExperimentConfig(ns=(1024,)))
        lines = rep.to_csv().splitlines()
        assert lines[0] == ",".join(rep.columns)
        assert lines[1].endswith(",false")
        assert float(lines[1].split(",")[3]) == rep.rows[0]["ratio"]


class TestMonteCarloAudits:
    def test_distance_decay_q1_gaussian(self):
        rep = run_distance_decay(ExperimentConfig(q=1, H=0.3, **SMALL))
        assert rep.passed
        assert all(r["stein_bound"] < 1e-12 for r in rep.rows)

    def test_distance_decay_reproducible(self):
        cfg = ExperimentConfig(**SMALL)
        assert run_distance_decay(cfg).to_json() == run_distance_decay(cfg).to_json()

    def test_comparison_identical_samples(self):
        from hermlil.distances import comparison_rhs, kolmogorov_multid, wasserstein_assignment
        G = np.random.default_rng(0).standard_normal((50, 2))
        assert kolmogorov_multid(G, G).value == 0.0
        assert comparison_rhs(2, wasserstein_assignment(G, G).value) == 0.0

    def test_comparison_small(self):
        rep = run_comparison_check(ExperimentConfig(**SMALL))
        assert rep.passed
        assert set(rep.summary["pass_fraction"]) == {"1", "2", "3"}

    def test_lil_records_nondecreasing(self):
        rep = run_lil_trajectory(ExperimentConfig(model="white", q=1, **SMALL))
        assert rep.passed
        for rep_i in (0, 1):
            rec = [r["record"] for r in rep.rows if r["replicate"] == rep_i]
            assert rec == sorted(rec)
        assert rep.summary["limsup_candidates"]["regime"] == "breuer_major"

    def test_lil_white_noise_records_near_one(self):
        rep = run_lil_trajectory(ExperimentConfig(model="white", q=1, lil_N=2**18, lil_replicates=8, lil_grid=5))
        final = [r["record"] for r in rep.rows if r["n"] == 2**18]
        assert 0.5 < np.median(final) < 1.5

    def test_lil_rejects_short_horizon(self):
        with pytest.raises(ValueError):
            run_lil_trajectory(ExperimentConfig(lil_N=10))

    def test_audit_white_noise(self):
        rep = run_assumption_audit(ExperimentConfig(model="white", q=1, **SMALL))
        assert rep.passed and all(c.passed for c in rep.components)

    def test_audit_critical_passes(self):
        rep = run_assumption_audit(ExperimentConfig(M=500))
        assert rep.passed
        assert rep.summary["A1_fitted_C"] == pytest.approx(3.8676, abs=1e-3)
        assert rep.summary["A3_lambda_fit"] is not None

    def test_audit_regime_b_fails_on_variance(self):
        rep = run_assumption_audit(ExperimentConfig(H=0.9, M=200))
        verdicts = {r["assumption"]: r["pass"] for r in rep.rows}
        assert not rep.passed and not verdicts["A1"]
