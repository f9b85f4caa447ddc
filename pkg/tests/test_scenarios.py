import hashlib

import numpy as np
import pytest

from concord.core_model import write_csv
from concord.errors import SchemaError, ValidationError
from concord.evaluation import MetricInputs, compute_raw_metric
from concord.scenarios import (
    LENDING_ACTORS,
    LENDING_PROFIT,
    ScenarioSpec,
    case_metrics,
    generate_healthcare,
    generate_lending,
    lending_reward,
    lending_reward_tables,
    parse_scenario_spec,
)


def lending_spec(**kwargs):
    defaults = dict(name="lending", n_rows=400, seed=0, noise=0.05)
    defaults.update(kwargs)
    return ScenarioSpec(**defaults)


def healthcare_spec(**kwargs):
    defaults = dict(name="healthcare", n_rows=400, seed=0, noise=0.05)
    defaults.update(kwargs)
    return ScenarioSpec(**defaults)


class TestLendingGenerator:
    def test_balanced_bank_anchor_values(self):
        acts = np.array([0, 0])
        outs = np.array([0, 2])  # fully repaid, not repaid
        grp = np.zeros(2, dtype=int)
        r = lending_reward("bank", acts, outs, grp, "balanced")
        np.testing.assert_allclose(r, [1.0, 0.0])

    def test_applicant_prefers_full_grant_over_rejection(self):
        gen = generate_lending(lending_spec(noise=0.0, n_rows=1000))
        groups = gen.augmented.base.groups
        n = gen.augmented.n
        for variant in ("balanced", "strictest"):
            grant_full = lending_reward(
                "applicant", np.zeros(n, int), np.zeros(n, int), groups, variant
            )
            rejected = np.stack(
                [
                    lending_reward("applicant", np.full(n, 2), np.full(n, o), groups, variant)
                    for o in range(3)
                ]
            )
            assert np.all(rejected < grant_full[None, :])

    def test_bank_ordering_full_over_partial_over_default(self):
        n = 1000
        grp = np.zeros(n, dtype=int)
        for variant in ("balanced", "strictest"):
            for action in (0, 1):
                acts = np.full(n, action)
                full = lending_reward("bank", acts, np.zeros(n, int), grp, variant)
                part = lending_reward("bank", acts, np.ones(n, int), grp, variant)
                bad = lending_reward("bank", acts, np.full(n, 2), grp, variant)
                assert np.all(full >= part) and np.all(part >= bad)
                assert np.all(full > bad)

    def test_regulator_inclusion_bonus_applies_to_granting_actions(self):
        n = 500
        acts = np.zeros(n, dtype=int)
        outs = np.ones(n, dtype=int)
        base = lending_reward("regulator", acts, outs, np.zeros(n, int))
        boosted = lending_reward("regulator", acts, outs, np.ones(n, int))
        assert np.all(boosted > base)
        no_grant = lending_reward("regulator", np.full(n, 2), outs, np.ones(n, int))
        np.testing.assert_array_equal(
            no_grant, lending_reward("regulator", np.full(n, 2), outs, np.zeros(n, int))
        )

    def test_rewards_clipped_for_any_noise(self):
        for noise in (0.0, 0.25, 0.5):
            gen = generate_lending(lending_spec(noise=noise, n_rows=300, seed=3))
            assert gen.augmented.rewards.min() >= 0.0
            assert gen.augmented.rewards.max() <= 1.0

    def test_seed_determinism_bytes(self, tmp_path):
        a = generate_lending(lending_spec(seed=11))
        b = generate_lending(lending_spec(seed=11))
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(a.augmented, pa)
        write_csv(b.augmented, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_different_seeds_differ(self, tmp_path):
        a = generate_lending(lending_spec(seed=1))
        b = generate_lending(lending_spec(seed=2))
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(a.augmented, pa)
        write_csv(b.augmented, pb)
        ha = hashlib.sha256(pa.read_bytes()).hexdigest()
        hb = hashlib.sha256(pb.read_bytes()).hexdigest()
        assert ha != hb

    def test_intercept_hits_requested_repayment_rate(self):
        target = 0.55
        gen = generate_lending(
            lending_spec(n_rows=5000, seed=4, params={"full_repay_rate": target})
        )
        rate = float(np.mean(gen.augmented.base.outcomes == 0))
        assert abs(rate - target) <= 0.02

    def test_strictest_variant_tables(self):
        tables = lending_reward_tables("strictest")
        assert tables["bank"][0, 0] == 1.0 and tables["bank"][0, 1] == 0.0
        assert np.all(tables["applicant"][0] == 1.0)
        assert np.all(tables["applicant"][2] == 0.0)


class TestHealthcareGenerator:
    def test_zero_effect_parent_rewards_match_across_arms(self):
        gen = generate_healthcare(
            healthcare_spec(n_rows=2000, params={"effect": 0.0}, noise=0.0)
        )
        parent = gen.augmented.rewards[:, 2]
        arm = gen.augmented.base.actions
        gap = abs(parent[arm == 1].mean() - parent[arm == 0].mean())
        assert gap <= 0.02

    def test_provider_reward_decreases_with_cost(self):
        lo = generate_healthcare(healthcare_spec(noise=0.0, params={"cost": 0.05}))
        hi = generate_healthcare(healthcare_spec(noise=0.0, params={"cost": 0.3}))
        treated = lo.augmented.base.actions == 1
        assert (
            hi.augmented.rewards[treated, 0].mean()
            < lo.augmented.rewards[treated, 0].mean()
        )

    def test_constant_effect_stored_exactly(self):
        gen = generate_healthcare(healthcare_spec(params={"effect": 2.0}))
        np.testing.assert_array_equal(gen.ground_truth["effect"], 2.0)

    def test_potential_outcomes_consistent_with_factual(self):
        gen = generate_healthcare(healthcare_spec(seed=9))
        pat = gen.per_action_truths
        actions = gen.augmented.base.actions
        np.testing.assert_allclose(
            gen.augmented.base.outcomes, pat[np.arange(len(actions)), actions]
        )

    def test_25_features(self):
        gen = generate_healthcare(healthcare_spec())
        assert gen.augmented.base.features.shape[1] == 25


class TestCaseMetrics:
    def test_lending_has_seven_metrics_with_required_names(self):
        metrics = case_metrics("lending")
        names = [m.name for m in metrics]
        assert len(metrics) == 7
        assert "Accuracy" in names and "Demographic_Parity" in names
        assert "Total_Profit" in names and "Total_Loss" in names

    def test_healthcare_metric_names(self):
        names = [m.name for m in case_metrics("healthcare")]
        assert "Avg_outcome_difference" in names
        assert "Cost_Effectiveness" in names

    def test_unknown_scenario_rejected(self):
        with pytest.raises(ValidationError):
            case_metrics("insurance")

    def test_profit_and_loss_on_handmade_batch(self):
        # ten loans, all granted, all fully repaid: every attainable unit of
        # profit is realized and no loss is possible
        metrics = {m.name: m for m in case_metrics("lending")}
        probs = np.tile(np.array([[1.0, 0.0, 0.0]]), (10, 1))
        truths = np.zeros(10, dtype=int)
        profit = compute_raw_metric(metrics["Total_Profit"], probs, truths)
        loss = compute_raw_metric(metrics["Total_Loss"], probs, truths)
        assert profit == pytest.approx(1.0, abs=1e-12)
        assert loss == 0.0

    def test_profit_penalizes_defaults(self):
        metrics = {m.name: m for m in case_metrics("lending")}
        truths = np.array([0, 0, 2, 2])
        grant_all = np.tile(np.array([[1.0, 0.0, 0.0]]), (4, 1))
        selective = np.array(
            [[1, 0, 0], [1, 0, 0], [0, 0, 1], [0, 0, 1]], dtype=float
        )
        p_all = compute_raw_metric(metrics["Total_Profit"], grant_all, truths)
        p_sel = compute_raw_metric(metrics["Total_Profit"], selective, truths)
        assert p_sel > p_all
        assert p_sel == pytest.approx(1.0, abs=1e-12)

    def test_mean_outcome_metrics_read_potential_outcomes(self):
        metrics = {m.name: m for m in case_metrics("healthcare")}
        pat = np.array([[2.0, 6.0], [4.0, 8.0]])
        inputs = MetricInputs(truths=np.zeros(2), per_action_values=pat)
        treat_all = np.tile(np.array([[0.0, 1.0]]), (2, 1))
        mot = metrics["Mean_outcome_treated"].prepare(inputs).evaluate(treat_all)
        assert mot == pytest.approx(7.0)
        aod = metrics["Avg_outcome_difference"].prepare(inputs).evaluate(treat_all)
        assert aod == pytest.approx(7.0 - 0.0)  # nobody in control


class TestSpecParsing:
    def test_round_trip(self):
        spec = lending_spec(seed=5, params={"full_repay_rate": 0.6})
        again = parse_scenario_spec(spec.to_json())
        assert again == spec

    def test_bad_noise_has_json_pointer(self):
        doc = lending_spec().to_json()
        doc["noise"] = 0.9
        with pytest.raises(SchemaError) as err:
            parse_scenario_spec(doc)
        assert "/noise" in str(err.value)

    def test_bad_schema_tag(self):
        doc = lending_spec().to_json()
        doc["schema"] = "concord.scenario/999"
        with pytest.raises(SchemaError) as err:
            parse_scenario_spec(doc)
        assert "/schema" in str(err.value)

    def test_noise_bounds_validated(self):
        with pytest.raises(ValidationError):
            ScenarioSpec(name="lending", n_rows=10, noise=0.7)
