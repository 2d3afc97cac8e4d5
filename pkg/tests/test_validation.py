"""Harness tests: report plumbing, audits, and coverage-runner oracles."""

import json
import math

import numpy as np
import pytest

from divseq.confseq import ConfSeqConfig
from divseq.errors import OutOfRange
from divseq.estimators import (
    CostSpec,
    KernelSpec,
    kl_finite,
    mmd_v,
    ot_cost_discrete,
    tv_finite,
)
from divseq import validation
from divseq.validation import (
    SCENARIOS,
    BiasReport,
    LooReport,
    SimReport,
    TruthSpec,
    VilleReport,
    bias_direction_check,
    coverage_sim,
    leave_one_out_audit,
    reverse_ville_check,
    run_scenario,
    scenario_names,
)


class TestReports:
    def test_sim_report_line_is_deterministic_and_wall_free(self):
        r = SimReport("x", 10, 5, 1, 0.1, 0.05, 1.234, 7)
        line = r.to_line()
        assert line == SimReport("x", 10, 5, 1, 0.1, 0.05, 9.876, 7).to_line()
        payload = json.loads(line)
        assert "wall_time" not in payload
        assert payload["violation_count"] == 1
        assert payload["seed"] == 7
        assert "\n" not in line

    def test_sim_report_validates_counts(self):
        with pytest.raises(ValueError):
            SimReport("x", 10, 5, 11, 0.1, 0.0, 0.0, 0)
        with pytest.raises(ValueError):
            SimReport("x", 10, 5, 1, 1.5, 0.0, 0.0, 0)


class TestLeaveOneOut:
    @pytest.mark.parametrize(
        "kind", ["tv", "kl", "ks", "w1", "mmd_linear", "ot", "mmd_u"]
    )
    @pytest.mark.parametrize("k", [2, 3])
    def test_audit_passes(self, kind, k):
        rep = leave_one_out_audit(kind, alphabet_size=k, t_max=4)
        assert rep.passed
        assert rep.violation_count == 0
        assert rep.worst_residual <= 1e-12
        assert rep.datasets_checked > 0

    def test_dataset_count_scalar_kind(self):
        # multisets over {0,1} of sizes 2..6 number 3+4+5+6+7
        rep = leave_one_out_audit("tv", alphabet_size=2, t_max=5)
        assert rep.datasets_checked == 25

    def test_dataset_count_pair_kind(self):
        # multisets of pairs over {0,1}^2 of sizes 3..6
        rep = leave_one_out_audit("mmd_u", alphabet_size=2, t_max=5)
        assert rep.datasets_checked == 20 + 35 + 56 + 84

    def test_one_residual_by_hand(self):
        # dataset (0, 1, 1) against the fixed 2-cell reference
        p = np.array([0.25, 0.75])
        full = tv_finite(np.array([1, 2]), p)
        drop0 = tv_finite(np.array([0, 2]), p)
        drop1 = tv_finite(np.array([1, 1]), p)
        loo = (1 / 3) * drop0 + (2 / 3) * drop1
        assert full <= loo + 1e-12

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            leave_one_out_audit("nope")
        with pytest.raises(OutOfRange):
            leave_one_out_audit("tv", alphabet_size=4)
        with pytest.raises(OutOfRange):
            leave_one_out_audit("tv", t_max=9)

    def test_report_line(self):
        rep = leave_one_out_audit("ks", alphabet_size=2, t_max=3)
        payload = json.loads(rep.to_line())
        assert payload["kind"] == "ks"
        assert payload["passed"] is True


class TestReverseVille:
    def test_one_sample_passes(self):
        rep = reverse_ville_check("abs_mean", t0=10, threshold=0.5,
                                  horizon=400, replications=2000, seed=3)
        assert rep.passed
        assert 0.0 <= rep.crossing_rate <= 1.0
        assert rep.mean_at_t0 == pytest.approx(math.sqrt(2 / (10 * math.pi)), rel=0.1)

    def test_exact_mean_variant(self):
        exact = math.sqrt(2 / (10 * math.pi))
        rep = reverse_ville_check("abs_mean", t0=10, threshold=1.0,
                                  horizon=400, replications=2000, seed=3,
                                  mean_at_t0=exact)
        assert rep.mean_at_t0 == exact
        assert rep.bound == pytest.approx(exact + 3 * rep.std_error)
        assert rep.passed

    def test_two_sample_carries_extra_slack(self):
        rep = reverse_ville_check("abs_mean_diff", t0=10, threshold=1.0,
                                  horizon=300, replications=1500, seed=5)
        assert rep.passed
        # the paired-difference bound is inflated by e
        assert rep.bound > math.e * rep.mean_at_t0 / rep.threshold - 1e-12

    def test_deterministic(self):
        a = reverse_ville_check("abs_mean", 10, 0.5, 200, 500, seed=11)
        b = reverse_ville_check("abs_mean", 10, 0.5, 200, 500, seed=11)
        assert a.to_line() == b.to_line()

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            reverse_ville_check("nope", 10, 0.5)
        with pytest.raises(OutOfRange):
            reverse_ville_check("abs_mean", 0, 0.5)
        with pytest.raises(OutOfRange):
            reverse_ville_check("abs_mean", 10, -1.0)
        with pytest.raises(OutOfRange):
            reverse_ville_check("abs_mean", 10, 0.5, horizon=5)


class TestCoverageSim:
    def test_dkw_uniform_small(self):
        cfg = ConfSeqConfig(kind="dkw", delta=0.05)
        rep = coverage_sim(cfg, TruthSpec("uniform01"), 300, 100, seed=1)
        assert rep.violation_rate <= 0.05
        assert rep.horizon == 300 and rep.replications == 100

    def test_deterministic_line(self):
        cfg = ConfSeqConfig(kind="dkw", delta=0.05)
        a = coverage_sim(cfg, TruthSpec("uniform01"), 120, 40, seed=2)
        b = coverage_sim(cfg, TruthSpec("uniform01"), 120, 40, seed=2)
        assert a.to_line() == b.to_line()

    def test_ks_null_small(self):
        cfg = ConfSeqConfig(kind="ks", delta=0.05)
        rep = coverage_sim(cfg, TruthSpec("uniform01"), 150, 50, seed=4)
        assert rep.violation_rate <= 0.1

    def test_tv_null_small(self):
        cfg = ConfSeqConfig(kind="tv", delta=0.05, reference=np.array([0.2, 0.3, 0.5]))
        rep = coverage_sim(cfg, TruthSpec("categorical"), 300, 80, seed=5)
        assert rep.violation_rate <= 0.1

    def test_tv_wrong_truth_is_caught(self):
        # reference says (0.2, 0.3, 0.5) but the stream is far away and the
        # claimed value 0 is wrong, so every trajectory must escape the band
        cfg = ConfSeqConfig(kind="tv", delta=0.05, reference=np.array([0.2, 0.3, 0.5]))
        truth = TruthSpec("categorical", value=0.0, probs=(0.7, 0.2, 0.1))
        rep = coverage_sim(cfg, truth, 600, 30, seed=6)
        assert rep.violation_rate == 1.0

    def test_tv_shifted_law_with_correct_value_covers(self):
        p = np.array([0.2, 0.3, 0.5])
        q = (0.7, 0.2, 0.1)
        true_tv = 0.5 * float(np.abs(np.array(q) - p).sum())
        cfg = ConfSeqConfig(kind="tv", delta=0.05, reference=p)
        rep = coverage_sim(
            cfg, TruthSpec("categorical", value=true_tv, probs=q), 400, 60, seed=7
        )
        assert rep.violation_rate <= 0.1

    def test_kl_null_small(self):
        cfg = ConfSeqConfig(kind="kl", delta=0.05, reference=np.array([0.2, 0.3, 0.5]))
        rep = coverage_sim(cfg, TruthSpec("categorical"), 300, 80, seed=8)
        assert rep.violation_rate <= 0.1

    def test_mean_gauss_small(self):
        cfg = ConfSeqConfig(kind="mean", delta=0.05)
        rep = coverage_sim(cfg, TruthSpec("gaussian"), 400, 200, seed=9)
        assert rep.violation_rate <= 0.1

    def test_mean_nonzero_location(self):
        cfg = ConfSeqConfig(kind="mean", delta=0.05)
        rep = coverage_sim(cfg, TruthSpec("gaussian", mean=2.5), 200, 100, seed=10)
        assert rep.violation_rate <= 0.1

    def test_mean_multivariate(self):
        cfg = ConfSeqConfig(kind="mean", delta=0.05, dimension=3)
        rep = coverage_sim(cfg, TruthSpec("gaussian"), 150, 60, seed=11)
        assert rep.violation_rate <= 0.1

    def test_mmd_null_small(self):
        cfg = ConfSeqConfig(kind="mmd", delta=0.05, kernel=KernelSpec.gaussian_rbf(1.0))
        rep = coverage_sim(cfg, TruthSpec("uniform01"), 60, 20, seed=12)
        assert rep.violation_rate <= 0.2

    def test_ot_fast_path_small(self):
        cfg = ConfSeqConfig(
            kind="ot", delta=0.05, cost=CostSpec.matrix([[0.0, 1.0], [1.0, 0.0]])
        )
        rep = coverage_sim(
            cfg, TruthSpec("categorical", probs=(0.4, 0.6)), 250, 60, seed=13
        )
        assert rep.violation_rate <= 0.1

    def test_ot_screened_path_small(self):
        cost = CostSpec.matrix([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
        cfg = ConfSeqConfig(kind="ot", delta=0.05, cost=cost)
        rep = coverage_sim(
            cfg, TruthSpec("categorical", probs=(0.3, 0.3, 0.4)), 70, 10, seed=14
        )
        assert rep.violation_rate <= 0.3

    def test_generator_mismatch(self):
        cfg = ConfSeqConfig(kind="mean", delta=0.05)
        with pytest.raises(ValueError):
            coverage_sim(cfg, TruthSpec("uniform01"), 50, 10)
        cfg2 = ConfSeqConfig(kind="dkw", delta=0.05)
        with pytest.raises(ValueError):
            coverage_sim(cfg2, TruthSpec("gaussian"), 50, 10)

    def test_bad_sizes(self):
        cfg = ConfSeqConfig(kind="dkw", delta=0.05)
        with pytest.raises(OutOfRange):
            coverage_sim(cfg, TruthSpec("uniform01"), 0, 10)
        with pytest.raises(OutOfRange):
            coverage_sim(cfg, TruthSpec("uniform01"), 10, 0)


class TestRunnerOracles:
    def test_mmd_path_matches_batch_estimator(self):
        kernel = KernelSpec.gaussian_rbf(0.7)
        rng = np.random.default_rng(40)
        x = rng.uniform(size=14)
        y = rng.uniform(size=14)
        ti, si = validation._alternation(14)
        keep = si >= 1
        est = validation._mmd_path_estimates(kernel, x, y, ti[keep], si[keep])
        for idx, (t, s) in enumerate(zip(ti[keep], si[keep])):
            want = mmd_v(x[: int(t)], y[: int(s)], kernel)
            assert est[idx] == pytest.approx(want, abs=1e-9)

    def test_tv_runner_matches_naive_replay(self):
        # replay the chunked draw stream and recompute violations per step
        p = np.array([0.2, 0.3, 0.5])
        cfg = ConfSeqConfig(kind="tv", delta=0.2, reference=p).validated()
        T, R, seed = 90, 7, 21
        rep = coverage_sim(cfg, TruthSpec("categorical"), T, R, seed=seed)
        gamma = np.array(
            [
                validation.confseq.tv_finite_boundary(
                    t, cfg.delta, cfg.stitching, alphabet_size=3
                )
                for t in range(1, T + 1)
            ]
        )
        count = 0
        for m, g in validation._chunked_rows(seed, R):
            draws = g.choice(3, size=(m, T), p=p)
            for r in range(m):
                counts = np.zeros(3)
                hit = False
                for t in range(1, T + 1):
                    counts[draws[r, t - 1]] += 1
                    if abs(tv_finite(counts, p)) > gamma[t - 1]:
                        hit = True
                        break
                count += int(hit)
        assert rep.violation_count == count

    def test_kl_runner_matches_naive_replay(self):
        p = np.array([0.2, 0.3, 0.5])
        cfg = ConfSeqConfig(kind="kl", delta=0.05, reference=p).validated()
        T, R, seed = 60, 6, 22
        rep = coverage_sim(cfg, TruthSpec("categorical"), T, R, seed=seed)
        gamma = validation.confseq.kl_gamma_curve(T, cfg.delta, cfg.stitching, p=p)
        count = 0
        for m, g in validation._chunked_rows(seed, R):
            draws = g.choice(3, size=(m, T), p=p)
            for r in range(m):
                counts = np.zeros(3)
                hit = False
                for t in range(1, T + 1):
                    counts[draws[r, t - 1]] += 1
                    if kl_finite(counts, p) > gamma[t - 1]:
                        hit = True
                        break
                count += int(hit)
        assert rep.violation_count == count

    def test_ot_fast_path_matches_exact_transport_replay(self):
        cost = CostSpec.matrix([[0.0, 1.0], [1.0, 0.0]])
        cfg = ConfSeqConfig(kind="ot", delta=0.3, cost=cost).validated()
        T, R, seed = 40, 5, 23
        probs = (0.4, 0.6)
        rep = coverage_sim(cfg, TruthSpec("categorical", probs=probs), T, R, seed=seed)
        bias = validation.confseq._ot_default_bias(1.0, 2)
        gamma = validation._two_sample_gamma(
            T,
            lambda t, s: validation.confseq.ot_boundary(
                t, s, cfg.delta, cfg.stitching, cost_bound=1.0,
                bias_bound=bias, mode=cfg.effective_mode(),
            ),
        )
        law = np.array(probs)
        count = 0
        for m, g in validation._chunked_rows(seed, R):
            xs = g.choice(2, size=(m, T), p=law)
            ys = g.choice(2, size=(m, T), p=law)
            tb, sb = validation._alternation(T)
            for r in range(m):
                hit = False
                for step in range(2, 2 * T + 1):
                    t, s = int(tb[step - 1]), int(sb[step - 1])
                    cx = np.bincount(xs[r, :t], minlength=2).astype(float)
                    cy = np.bincount(ys[r, :s], minlength=2).astype(float)
                    val = ot_cost_discrete(cx / t, cy / s, cost)
                    if abs(val) > gamma[step - 1]:
                        hit = True
                        break
                count += int(hit)
        assert rep.violation_count == count

    def test_smoothed_cdf_closed_form(self):
        # the smoothed uniform cdf must match direct quadrature of the mixture
        from scipy.stats import norm as _norm
        from scipy import integrate as _integrate

        sigma = 0.8
        for z in (-0.5, 0.1, 0.4, 0.9, 1.7):
            want, _ = _integrate.quad(
                lambda v: _norm.cdf((z - v) / sigma), 0.0, 1.0
            )
            got = float(validation._smoothed_uniform_cdf(np.float64(z), sigma))
            assert got == pytest.approx(want, abs=1e-10)

    def test_smoothed_w1_scenario_small(self):
        rep = validation._run_smoothed_w1(60, 20, 0.05, seed=15)
        assert rep.violation_rate <= 0.2


class TestBiasDirection:
    def test_ks_bias_positive_and_shrinking(self):
        rep = bias_direction_check("ks", t_grid=(10, 20, 40), replications=800, seed=1)
        assert rep.positive
        assert rep.nonincreasing
        assert rep.stopped_passed
        assert rep.passed
        assert all(m > 0 for m in rep.means)
        assert rep.means[0] > rep.means[-1]

    def test_tv_bias_positive(self):
        rep = bias_direction_check("tv", t_grid=(10, 20, 40), replications=800, seed=2)
        assert rep.passed

    def test_mmd_bias_positive(self):
        rep = bias_direction_check("mmd", t_grid=(8, 16, 32), replications=300, seed=3)
        assert rep.passed

    def test_ustat_centered(self):
        rep = bias_direction_check("mmd_u", t_grid=(8, 16), replications=400, seed=4)
        assert rep.passed
        assert all(abs(m) <= 3 * se for m, se in zip(rep.means, rep.std_errors))

    def test_mmd_estimates_match_batch(self):
        grid = (5, 9)
        R, seed = 6, 30
        est = validation._bias_estimates("mmd", grid, R, seed)
        kernel = KernelSpec.gaussian_rbf(1.0)
        row = 0
        for m, g in validation._chunked_rows(seed, R):
            x = g.uniform(size=(m, grid[-1]))
            y = g.uniform(size=(m, grid[-1]))
            for r in range(m):
                for j, t in enumerate(grid):
                    want = mmd_v(x[r, :t], y[r, :t], kernel)
                    assert est[row + r, j] == pytest.approx(want, abs=1e-9)
            row += m

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            bias_direction_check("nope")
        with pytest.raises(OutOfRange):
            bias_direction_check("ks", t_grid=(10,))
        with pytest.raises(OutOfRange):
            bias_direction_check("ks", t_grid=(20, 10))
        with pytest.raises(OutOfRange):
            bias_direction_check("ks", t_grid=(10, 20), replications=1)

    def test_report_line_deterministic(self):
        a = bias_direction_check("ks", t_grid=(5, 10), replications=50, seed=6)
        b = bias_direction_check("ks", t_grid=(5, 10), replications=50, seed=6)
        assert a.to_line() == b.to_line()


class TestScenarios:
    def test_registry_names(self):
        assert set(scenario_names()) == {
            "dkw-uniform", "ks-null", "mmd-null", "tv-finite", "kl-finite",
            "ot-finite", "mean-gauss", "smoothed-w1", "loo-audit",
        }
        for name, spec in SCENARIOS.items():
            assert spec.name == name
            assert 0 < spec.delta < 1

    def test_unknown_scenario(self):
        with pytest.raises(ValueError):
            run_scenario("nope")

    def test_loo_audit_scenario(self):
        rep, passed = run_scenario("loo-audit")
        assert passed
        assert rep.kind == "all"
        assert rep.violation_count == 0

    def test_small_override_run(self):
        rep, passed = run_scenario("ks-null", horizon=100, replications=40, seed=2)
        assert isinstance(rep, SimReport)
        assert isinstance(passed, bool)
        assert rep.name == "ks-null"
        assert rep.horizon == 100 and rep.replications == 40

    def test_mean_scenario_small(self):
        rep, passed = run_scenario("mean-gauss", horizon=300, replications=150, seed=3)
        assert passed

    def test_single_replicate_has_wide_se(self):
        rep, _ = run_scenario("dkw-uniform", horizon=50, replications=1, seed=4)
        assert rep.replications == 1
        assert rep.std_error == 0.0
