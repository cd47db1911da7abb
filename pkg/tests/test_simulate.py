import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy import special, stats

from rooney_lab.errors import DomainError, EmptyConditioningEvent, InsufficientConditioningEvents
from rooney_lab.oracle import exact_prob_binds, exact_prob_positive_given_change, exact_rk
from rooney_lab.powerlaw import OrderStatSpec, os_cdf
from rooney_lab.rooney import ModelParams, phi2
from rooney_lab.simulate import (
    MOM_BLOCKS,
    BoundedModel,
    EstimatorReport,
    bounded_experiment,
    cond_exp_filtered_discrete,
    default_estimator,
    estimate_bind_rate,
    estimate_prob_positive,
    estimate_rk,
    estimate_utility_change,
    ratio_estimate,
    run_trial,
    simulate_draws,
    summarize,
    triangular_model,
    uniform_model,
)

params_strategy = st.builds(
    ModelParams,
    alpha=st.sampled_from([0.2, 0.5, 1.0]),
    beta=st.sampled_from([1.0, 1.5, 3.0, 20.0, math.inf]),
    delta=st.sampled_from([0.5, 1.0, 2.0]),
    k=st.integers(1, 5),
    n=st.integers(5, 40),
)


class TestRunTrial:
    @settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(params=params_strategy, ell=st.integers(1, 3), index=st.integers(0, 10**6))
    def test_rule_invariants(self, params, ell, index):
        if ell > min(params.k, params.n_x):
            return
        out = run_trial(params, ell=ell, seed=11, trial_index=index)
        assert len(out.finalists_unconstrained) == len(out.finalists_ruled) == params.k
        assert out.utility_unconstrained == math.fsum(c.potential for c in out.finalists_unconstrained)
        assert out.utility_ruled == math.fsum(c.potential for c in out.finalists_ruled)
        x_top = sum(c.group == "X" for c in out.finalists_unconstrained)
        assert out.rule_bound == (x_top < ell)
        assert sum(c.group == "X" for c in out.finalists_ruled) >= ell
        if not out.rule_bound:
            assert out.finalists_ruled == out.finalists_unconstrained
            assert out.utility_ruled == out.utility_unconstrained
        else:
            assert set(out.finalists_ruled) != set(out.finalists_unconstrained)

    @settings(max_examples=100, deadline=None)
    @given(params=params_strategy, index=st.integers(0, 10**6))
    def test_single_swap(self, params, index):
        out = run_trial(params, seed=5, trial_index=index)
        if not out.rule_bound:
            return
        before, after = set(out.finalists_unconstrained), set(out.finalists_ruled)
        (removed,) = before - after
        (added,) = after - before
        assert removed.group == "Y" and added.group == "X"
        # the seat comes from the lowest-ranked finalist
        assert removed == out.finalists_unconstrained[-1]
        assert out.utility_ruled - out.utility_unconstrained == pytest.approx(added.potential - removed.potential)

    def test_infinite_bias_always_binds(self):
        params = ModelParams(0.5, math.inf, 1.0, 3, 20)
        assert all(run_trial(params, seed=1, trial_index=i).rule_bound for i in range(50))

    def test_deterministic_per_index(self):
        params = ModelParams(0.5, 2.0, 1.0, 2, 30)
        assert run_trial(params, seed=3, trial_index=17) == run_trial(params, seed=3, trial_index=17)
        assert run_trial(params, seed=3, trial_index=17) != run_trial(params, seed=3, trial_index=18)
        assert run_trial(params, seed=3, trial_index=17) != run_trial(params, seed=4, trial_index=17)

    @pytest.mark.parametrize("n,k", [(20, 2), (5, 5)])
    def test_bind_frequency_matches_oracle(self, n, k):
        params = ModelParams(0.6, 1.8, 1.2, k, n)
        trials = 20_000
        hits = sum(run_trial(params, seed=8, trial_index=i).rule_bound for i in range(trials))
        p = exact_prob_binds(n, k, 0.6, 1.8, 1.2)
        assert abs(hits / trials - p) < 3 * math.sqrt(p * (1 - p) / trials)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(ell=0), dict(ell=3)],
    )
    def test_rejects_bad_reserve(self, kwargs):
        with pytest.raises(DomainError):
            run_trial(ModelParams(0.1, 2.0, 1.0, 2, 20), **kwargs)


@pytest.fixture(scope="module")
def draws():
    params = ModelParams(0.4, 2.0, 1.5, TestDraws.K, TestDraws.N)
    return params, simulate_draws(params, 100_000, seed=21)


class TestDraws:
    N, K = 50, 3

    def test_kth_best_y_law(self, draws):
        params, (_, y_k, _) = draws
        spec = OrderStatSpec(self.N - self.K + 1, self.N)
        res = stats.kstest(y_k, lambda t: os_cdf(spec, params.delta, np.asarray(t)))
        assert res.pvalue > 0.001

    def test_top_x_law(self, draws):
        params, (x_max, _, _) = draws
        spec = OrderStatSpec(params.n_x, params.n_x)
        res = stats.kstest(x_max, lambda t: os_cdf(spec, params.delta, np.asarray(t)))
        assert res.pvalue > 0.001

    def test_sampling_methods_agree(self):
        params = ModelParams(0.5, 2.0, 1.0, 2, 40)
        fast = simulate_draws(params, 30_000, seed=1, method="topk")
        full = simulate_draws(params, 30_000, seed=2, method="full")
        for a, b in zip(fast[:2], full[:2]):
            assert stats.ks_2samp(a, b).pvalue > 0.001

    def test_thread_count_does_not_change_results(self):
        params = ModelParams(0.5, 2.0, 2.0, 2, 200)
        one = summarize(params, 100_000, seed=9, threads=1)
        four = summarize(params, 100_000, seed=9, threads=4)
        assert {k: v.as_dict() for k, v in one.items()} == {k: v.as_dict() for k, v in four.items()}

    def test_seed_changes_results(self):
        params = ModelParams(0.5, 2.0, 2.0, 2, 200)
        a = estimate_bind_rate(params, 10_000, seed=1)
        b = estimate_bind_rate(params, 10_000, seed=2)
        assert a.point_estimate != b.point_estimate

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            simulate_draws(ModelParams(0.5, 2.0, 2.0, 2, 20), 10, method="bogus")


class TestEstimators:
    def test_default_kind(self):
        assert default_estimator(1.0) == "median-of-means"
        assert default_estimator(1.5) == "mean"
        assert MOM_BLOCKS == 40

    def test_infinite_bias_ratio(self):
        # all trials bind and equal pools make r_2 exactly (1+delta)/delta at every n
        params = ModelParams(1.0, math.inf, 2.0, 2, 300)
        rep = estimate_rk(params, 200_000, seed=4)
        assert rep.events == rep.trials
        assert abs(rep.point_estimate - 1.5) < 3 * rep.std_error

    @pytest.mark.parametrize("delta,kind", [(2.0, "mean"), (2.0, "median-of-means"), (0.8, "median-of-means")])
    def test_ratio_matches_oracle(self, delta, kind):
        params = ModelParams(0.5, 2.0, delta, 2, 200)
        rep = estimate_rk(params, 400_000, estimator_kind=kind, seed=12)
        assert rep.estimator_kind == kind
        exact = exact_rk(200, 2, 0.5, 2.0, delta)
        assert abs(rep.point_estimate - exact) < 3 * rep.std_error

    def test_bind_rate_matches_oracle(self):
        params = ModelParams(0.3, 3.0, 1.0, 3, 150)
        rep = estimate_bind_rate(params, 200_000, seed=6)
        assert abs(rep.point_estimate - exact_prob_binds(150, 3, 0.3, 3.0, 1.0)) < 3 * rep.std_error

    def test_prob_positive_matches_oracle(self):
        params = ModelParams(0.3, 3.0, 1.0, 3, 150)
        rep = estimate_prob_positive(params, 200_000, seed=6)
        exact = exact_prob_positive_given_change(150, 3, 0.3, 3.0, 1.0)
        assert abs(rep.point_estimate - exact) < 3 * rep.std_error

    @pytest.mark.parametrize("alpha", [0.1, 0.4, 1.0])
    @pytest.mark.parametrize("beta", [1.1, 4.0, 50.0])
    def test_sign_link(self, alpha, beta):
        delta = 2.0
        gap = phi2(alpha, beta, delta) - 1
        if abs(gap) <= 0.1:
            pytest.skip("phi too close to 1 for a sign claim")
        rep = estimate_utility_change(ModelParams(alpha, beta, delta, 2, 500), 10**6, seed=13)
        assert np.sign(rep.point_estimate) == np.sign(gap)

    def test_summary_is_consistent_with_single_estimators(self):
        params = ModelParams(0.5, 2.0, 2.0, 2, 100)
        s = summarize(params, 50_000, seed=3)
        assert s["bind_rate"] == estimate_bind_rate(params, 50_000, seed=3)
        assert s["rk"] == estimate_rk(params, 50_000, seed=3)
        assert s["prob_positive"] == estimate_prob_positive(params, 50_000, seed=3)
        assert s["utility_change"] == estimate_utility_change(params, 50_000, seed=3)

    def test_minimum_trials(self):
        with pytest.raises(DomainError):
            estimate_rk(ModelParams(0.5, 2.0, 2.0, 2, 100), 999)

    def test_empty_blocks_are_reported(self):
        num = np.ones(4000)
        den = np.zeros(4000)
        den[:10] = 1.0
        with pytest.raises(InsufficientConditioningEvents):
            ratio_estimate(num, den, "median-of-means")

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            ratio_estimate(np.ones(10), np.ones(10), "trimmed")

    def test_report_interval(self):
        rep = EstimatorReport(1.0, 0.5, 1000, "mean", 10)
        assert rep.ci() == pytest.approx((0.02, 1.98))
        d = rep.as_dict()
        assert d["ci95"] == pytest.approx([0.02, 1.98]) and d["trials"] == 1000


class TestDiscreteDemo:
    SUPPORT = (1, 5, 9, 13)
    UNIFORM = (0.25,) * 4

    @pytest.mark.parametrize("beta,expected", [(1, 31 / 3), (2, 10), (3, 9), (4, 9)])
    def test_filtered_means(self, beta, expected):
        assert cond_exp_filtered_discrete(self.SUPPORT, self.UNIFORM, beta) == pytest.approx(expected, rel=1e-15)

    def test_exact_values(self):
        assert cond_exp_filtered_discrete(self.SUPPORT, self.UNIFORM, 2) == 10
        assert cond_exp_filtered_discrete(self.SUPPORT, self.UNIFORM, 3) == 9

    def test_filter_is_not_monotone(self):
        values = [cond_exp_filtered_discrete(self.SUPPORT, self.UNIFORM, b) for b in (1, 2, 3)]
        assert values[1] < values[0] or values[2] < values[1]

    def test_ties_are_excluded(self):
        # X = 2Y exactly does not pass a strict filter
        assert cond_exp_filtered_discrete((1, 2), (0.5, 0.5), 1.5) == 2.0
        with pytest.raises(EmptyConditioningEvent):
            cond_exp_filtered_discrete((1, 2), (0.5, 0.5), 2)

    def test_rejects_bad_weights(self):
        with pytest.raises(DomainError):
            cond_exp_filtered_discrete((1, 2), (0.5, 0.6), 2)
        with pytest.raises(DomainError):
            cond_exp_filtered_discrete((), (), 2)


class TestBounded:
    def test_uniform_positive(self):
        rep = bounded_experiment(uniform_model(0.9), 200, 10**6, seed=1)
        lo, _ = rep.ci()
        assert lo > 0

    def test_no_bias_gap(self):
        n = 10
        rep = bounded_experiment(uniform_model(0.0), n, 200_000, seed=2)
        assert rep.events == rep.trials
        assert abs(rep.point_estimate - 1 / (n + 1)) < 3 * rep.std_error

    def test_triangular_no_bias_gap(self):
        # cdf x^2 means X = U^(1/2); take means of the top two uniform order statistics
        n = 12
        top = math.exp(special.betaln(n + 0.5, 1) - special.betaln(n, 1))
        second = math.exp(special.betaln(n - 0.5, 2) - special.betaln(n - 1, 2))
        rep = bounded_experiment(triangular_model(0.0), n, 200_000, seed=3)
        assert abs(rep.point_estimate - (top - second)) < 3 * rep.std_error

    def test_small_pool_runs(self):
        rep = bounded_experiment(uniform_model(0.9), 2, 50_000, seed=4)
        assert math.isfinite(rep.point_estimate)

    @pytest.mark.parametrize("scale", [1.0, -0.1])
    def test_rejects_cap(self, scale):
        with pytest.raises(DomainError):
            uniform_model(scale)

    def test_custom_model_cap(self):
        with pytest.raises(DomainError):
            BoundedModel(cdf=lambda x: x, sampler=lambda u: u, bias_map=lambda x: x, bias_cap=1.0)
