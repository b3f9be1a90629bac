"""Simulation loop protocol, loss accounting, baseline pairing, and regret."""

import math

import numpy as np
import pytest

from courtlearn.core import (
    ConfigurationError,
    ConstantTruth,
    LinearTruth,
    PointMassCosts,
    SingletonCases,
    BallCases,
    UniformCosts,
)
from courtlearn.learners import LearnerFamily, LearnerKind
from courtlearn.policies import (
    DynamicCompellingConfig,
    EtcConfig,
    NoSubsidyConfig,
    SubsidySamplingConfig,
)
from courtlearn.sim import (
    RunConfig,
    check_deterrent,
    draw_environment,
    estimate_regret,
    offline_baseline,
    run,
)

MEAN = LearnerKind(LearnerFamily.EMPIRICAL_MEAN)


def constant_config(**overrides):
    base = dict(
        horizon=10,
        truth=ConstantTruth(mu=1.0, sigma=0.5, alpha=2.0),
        cases=SingletonCases(),
        costs=PointMassCosts(1.0),
        learner=MEAN,
        policy=NoSubsidyConfig(),
        seed=0,
    )
    base.update(overrides)
    return RunConfig(**base)


def compel_all(horizon, alpha):
    # a compel phase at least as long as the horizon
    return EtcConfig(horizon=horizon, alpha=alpha * math.sqrt(horizon) + 1, c_max=1.0)


class TestRunProtocol:
    def test_settle_only_hand_trace(self):
        # zero noise, cost too high for anyone: all five cases settle at the
        # empty-data prediction 0, each paying squared error 1
        config = constant_config(
            horizon=5,
            truth=ConstantTruth(mu=1.0, sigma=0.0, alpha=1.0),
            costs=PointMassCosts(3.0),
        )
        ledger = run(config)
        assert ledger.total_loss == 5.0
        assert ledger.court_count == 0
        assert all(not r.went_to_court for r in ledger.records)
        assert all(r.applied_decision == 0.0 for r in ledger.records)

    def test_compel_all_hand_trace(self):
        # zero noise: the first court visit pins the rule exactly, so the
        # only loss is three court fees of 0.5
        config = constant_config(
            horizon=3,
            truth=ConstantTruth(mu=1.0, sigma=0.0, alpha=10.0),
            costs=PointMassCosts(0.5),
            policy=EtcConfig(horizon=3, alpha=10.0, c_max=1.0),
        )
        ledger = run(config)
        assert ledger.total_loss == pytest.approx(1.5)
        assert ledger.court_count == 3
        assert [r.m_before for r in ledger.records] == [0, 1, 2]

    def test_court_updates_before_deciding(self):
        # litigated steps are decided from the post-update dataset: with zero
        # noise the very first court decision is already exact
        config = constant_config(
            horizon=1,
            truth=ConstantTruth(mu=1.0, sigma=0.0, alpha=10.0),
            costs=PointMassCosts(0.5),
            policy=EtcConfig(horizon=1, alpha=10.0, c_max=1.0),
        )
        record = run(config).records[0]
        assert record.went_to_court
        assert record.applied_decision == 1.0
        assert record.settlement_value == 0.0  # what settling would have paid

    def test_accounting_identity(self):
        config = constant_config(horizon=200, policy=DynamicCompellingConfig(2.0, 1.0), seed=3)
        ledger = run(config)
        assert ledger.recompute_total_loss() == ledger.total_loss
        for r in ledger.records:
            diff = r.applied_decision - r.true_value
            assert r.squared_error == diff * diff
            assert r.court_cost_incurred == (r.cost if r.went_to_court else 0.0)

    def test_dataset_growth_identity(self):
        config = constant_config(horizon=300, policy=DynamicCompellingConfig(1.0, 1.0), seed=5)
        ledger = run(config)
        courted = [r for r in ledger.records if r.went_to_court]
        assert ledger.court_count == len(courted)
        # m_before counts exactly the prior courted steps
        for expected, record in enumerate(courted):
            assert record.m_before == expected

    def test_determinism(self):
        config = constant_config(horizon=500, policy=DynamicCompellingConfig(1.5, 1.0), seed=9)
        a, b = run(config), run(config)
        assert a.total_loss == b.total_loss
        assert a.court_count == b.court_count
        assert a.config_digest == b.config_digest
        for ra, rb in zip(a.records, b.records):
            assert ra.applied_decision == rb.applied_decision
            assert ra.cost == rb.cost and ra.subsidy == rb.subsidy

    def test_litigation_stops_for_good_once_bound_clears_cost(self):
        # once 2 * err < c_min with no selection pressure, the dataset is
        # frozen and no later case litigates
        config = constant_config(horizon=400, seed=11, costs=UniformCosts(0.8, 1.2))
        ledger = run(config)
        cleared = None
        for r in ledger.records:
            if 2.0 * r.pre_step_err_bound < config.costs.c_min and cleared is None:
                cleared = r.t
            if cleared is not None:
                assert not r.went_to_court
        assert cleared is not None

    def test_voluntary_litigation_threshold(self):
        # alpha = 2 makes the first two cases litigate at cost 1 (the second
        # on the boundary 2 * 0.5 <= 1), then everyone settles
        config = constant_config(horizon=50, truth=ConstantTruth(mu=1.0, sigma=0.5, alpha=2.0))
        ledger = run(config)
        assert [r.went_to_court for r in ledger.records[:3]] == [True, True, False]
        assert ledger.court_count == 2


class TestEnvironment:
    def test_prefix_stability_across_horizons(self):
        short = draw_environment(constant_config(horizon=100, seed=21), rep=2)
        long = draw_environment(constant_config(horizon=1000, seed=21), rep=2)
        np.testing.assert_array_equal(short.costs, long.costs[:100])
        np.testing.assert_array_equal(short.outcomes, long.outcomes[:100])

    def test_policy_does_not_perturb_environment(self):
        a = draw_environment(constant_config(seed=4, policy=NoSubsidyConfig()))
        b = draw_environment(constant_config(seed=4, policy=DynamicCompellingConfig(1.0, 1.0)))
        np.testing.assert_array_equal(a.costs, b.costs)
        np.testing.assert_array_equal(a.outcomes, b.outcomes)

    def test_ledger_consumes_the_environment_stream(self):
        config = constant_config(horizon=50, seed=13)
        env = draw_environment(config, rep=0)
        ledger = run(config, rep=0)
        np.testing.assert_array_equal([r.cost for r in ledger.records], env.costs)
        np.testing.assert_array_equal([r.true_value for r in ledger.records], env.f_values)


class TestOfflineBaseline:
    def test_noiseless_floor_is_zero(self):
        config = constant_config(truth=ConstantTruth(mu=1.0, sigma=0.0, alpha=2.0))
        assert offline_baseline(draw_environment(config), MEAN, 2.0) == 0.0

    def test_constant_family_floor_scale(self):
        # offline error of the pooled mean is sigma^2 / T per case, so the
        # total stays near sigma^2 = 1 regardless of T
        config = constant_config(horizon=10_000, truth=ConstantTruth(mu=2.0, sigma=1.0, alpha=4.0))
        values = [
            offline_baseline(draw_environment(config, rep), MEAN, 4.0) for rep in range(100)
        ]
        assert 0.5 <= float(np.mean(values)) <= 2.0

    def test_independent_of_online_policy(self):
        cfg_a = constant_config(seed=6, policy=NoSubsidyConfig())
        cfg_b = constant_config(seed=6, policy=DynamicCompellingConfig(1.0, 1.0))
        la = offline_baseline(draw_environment(cfg_a, 3), MEAN, 2.0)
        lb = offline_baseline(draw_environment(cfg_b, 3), MEAN, 2.0)
        assert la == lb

    def test_linear_baseline(self):
        truth = LinearTruth(beta=np.array([0.2, 0.1]), beta0=0.4, sigma=0.0, alpha=1.0)
        config = RunConfig(
            horizon=50,
            truth=truth,
            cases=BallCases(2),
            costs=PointMassCosts(1.0),
            learner=LearnerKind(LearnerFamily.OLS),
            policy=NoSubsidyConfig(),
            seed=0,
        )
        assert offline_baseline(draw_environment(config), config.learner, 1.0) < 1e-18


class TestEstimateRegret:
    def test_zero_loss_both_sides(self):
        # zero noise and (effectively) free court: compel-all learns exactly
        # and only pays a vanishing fee
        config = constant_config(
            horizon=100,
            truth=ConstantTruth(mu=1.0, sigma=0.0, alpha=10.0),
            costs=PointMassCosts(1e-9),
            policy=compel_all(100, 10.0),
        )
        report = estimate_regret(config, 20)
        assert abs(report.mean_regret) <= 1e-6

    def test_report_identity(self):
        config = constant_config(horizon=200, policy=DynamicCompellingConfig(2.0, 1.0))
        report = estimate_regret(config, 30)
        derived = (report.mean_online_loss - report.mean_offline_loss) / config.horizon
        assert report.mean_regret == pytest.approx(derived, rel=1e-12)

    def test_learning_stall_plateau(self):
        # with no selection pressure the dataset freezes at two observations
        # and the per-case regret plateaus near sigma^2 / 2 = 0.125
        for horizon in (1000, 10_000):
            config = constant_config(horizon=horizon, seed=2)
            report = estimate_regret(config, 200)
            assert 0.09 <= report.mean_regret <= 0.17

    def test_compel_all_regret_vanishes(self):
        # per-case regret from always litigating decays like log(T)/T
        reports = {
            horizon: estimate_regret(
                constant_config(
                    horizon=horizon,
                    costs=PointMassCosts(1e-9),
                    policy=compel_all(horizon, 2.0),
                    seed=7,
                ),
                60,
            )
            for horizon in (1000, 10_000)
        }
        assert reports[10_000].mean_regret < reports[1000].mean_regret

    def test_etc_regret_ratio_tracks_square_root(self):
        reports = {
            horizon: estimate_regret(
                constant_config(
                    horizon=horizon,
                    truth=ConstantTruth(mu=0.5, sigma=0.5, alpha=1.0),
                    costs=UniformCosts(0.5, 1.0),
                    policy=EtcConfig(horizon=horizon, alpha=1.0, c_max=1.0),
                    seed=3,
                ),
                80,
            )
            for horizon in (1000, 10_000)
        }
        ratio = reports[10_000].mean_regret / reports[1000].mean_regret
        expected = math.sqrt(1000 / 10_000)
        assert abs(ratio - expected) <= 0.35 * expected


class TestCheckDeterrent:
    def test_no_subsidy_payoff_always_negative(self):
        config = constant_config(horizon=30, seed=1)
        report = check_deterrent(config, 50)
        assert all(value <= 0.0 for _, value in report.per_step_estimates)
        assert report.max_violation <= 0.0
        assert report.satisfied

    def test_subsidy_sampling_reports_offers(self):
        config = constant_config(
            horizon=40,
            truth=ConstantTruth(mu=0.5, sigma=0.5, alpha=1.0),
            costs=UniformCosts(4.0, 12.0),
            policy=SubsidySamplingConfig(alpha=1.0, c_min=4.0, c_max=12.0),
            seed=8,
        )
        report = check_deterrent(config, 200)
        assert report.per_step_mean_subsidy.shape == (40,)
        assert np.all(report.per_step_mean_subsidy >= 0.0)
        assert report.satisfied


class TestRunConfigValidation:
    def test_horizon_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            constant_config(horizon=0)

    def test_mean_learner_needs_constant_truth(self):
        with pytest.raises(ConfigurationError):
            RunConfig(
                horizon=10,
                truth=LinearTruth(beta=np.array([0.1]), beta0=0.4, sigma=0.1, alpha=1.0),
                cases=BallCases(1),
                costs=PointMassCosts(1.0),
                learner=MEAN,
                policy=NoSubsidyConfig(),
            )

    def test_linear_learner_needs_vector_cases(self):
        with pytest.raises(ConfigurationError):
            constant_config(learner=LearnerKind(LearnerFamily.OLS))

    def test_etc_horizon_mismatch(self):
        with pytest.raises(ConfigurationError):
            constant_config(horizon=50, policy=EtcConfig(horizon=49, alpha=1.0, c_max=1.0))

    def test_subsidy_range_must_cover_costs(self):
        with pytest.raises(ConfigurationError):
            constant_config(
                costs=UniformCosts(4.0, 12.0),
                policy=SubsidySamplingConfig(alpha=1.0, c_min=5.0, c_max=12.0),
            )

    def test_ill_defined_subsidy_distribution_aborts_before_step_one(self):
        config = constant_config(
            costs=UniformCosts(0.25, 1.0),
            policy=SubsidySamplingConfig(alpha=1.0, c_min=0.25, c_max=1.0),
        )
        with pytest.raises(ConfigurationError):
            run(config)
