import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concord.core_model import ActionSpace, OutcomeSpace, StakeholderSet
from concord.errors import ParameterError, StateError, ValidationError
from concord.strategies import (
    ALL_PHIS,
    ActionDistribution,
    CompromiseRule,
    Strategy,
    StrategySet,
    decide,
    default_compromise_strategies,
    parse_strategy,
    parse_strategy_shorthand,
    score_actions,
    select_sharp,
    select_smooth,
    softmax,
)

# two actions as columns: a1 = (0.8, 0.2), a2 = (0.5, 0.5)
E2 = np.array([[0.8, 0.5], [0.2, 0.5]])


def rule(phi, **kwargs):
    return CompromiseRule(phi=phi, **kwargs)


class TestScoreActions:
    def test_maximin_hand_values(self):
        scores = score_actions(rule("maximin"), E2)
        np.testing.assert_allclose(scores, [0.2, 0.5])
        assert select_sharp(scores).argmax == 1

    def test_nash_bargaining_hand_values(self):
        scores = score_actions(rule("nash_bargaining", d=(0.0, 0.0)), E2)
        np.testing.assert_allclose(scores, [0.16, 0.25])
        assert select_sharp(scores).argmax == 1

    def test_kalai_smorodinsky_hand_values(self):
        scores = score_actions(
            rule("kalai_smorodinsky", d=(0.0, 0.0), u_star=(0.8, 0.5)), E2
        )
        np.testing.assert_allclose(scores, [0.4, 0.625])
        assert select_sharp(scores).argmax == 1

    def test_compromise_l2_hand_distances_tie(self):
        scores = score_actions(rule("compromise_programming_l2", u_star=(0.8, 0.5)), E2)
        np.testing.assert_allclose(scores, [-0.3, -0.3])
        assert select_sharp(scores).argmax == 0  # documented tie-break

    def test_single_stakeholder_every_phi_matches_utilities(self):
        E = np.array([[0.3, 0.9, 0.6]])
        for phi in ALL_PHIS:
            scores = score_actions(rule(phi), E)
            assert int(np.argmax(scores)) == 1, phi

    def test_nan_rejected(self):
        with pytest.raises(ValidationError):
            score_actions(rule("maximin"), np.array([[np.nan, 0.5], [0.2, 0.5]]))

    def test_ks_degenerate_actor_rejected(self):
        with pytest.raises(ParameterError):
            score_actions(
                rule("kalai_smorodinsky", d=(0.0, 0.3), u_star=(0.8, 0.3)), E2
            )

    def test_rule_validates_d_below_u_star(self):
        with pytest.raises(ParameterError):
            CompromiseRule(phi="kalai_smorodinsky", d=(0.5,), u_star=(0.5,))

    def test_batched_scores_match_loop(self):
        rng = np.random.default_rng(0)
        batch = rng.uniform(0.05, 0.95, size=(7, 3, 4))
        for phi in ALL_PHIS:
            r = rule(phi)
            batched = score_actions(r, batch)
            stacked = np.stack([score_actions(r, batch[i]) for i in range(7)])
            np.testing.assert_allclose(batched, stacked, atol=1e-12)


class TestSelectors:
    def test_sharp_tie_breaks_low_index(self):
        assert select_sharp(np.array([1.0, 1.0])).argmax == 0
        assert select_sharp(np.array([0.2, 0.5])).argmax == 1
        assert select_sharp(np.array([-0.3, -0.3, -0.1])).argmax == 2

    def test_sharp_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValidationError):
            select_sharp(np.array([]))
        with pytest.raises(ValidationError):
            select_sharp(np.array([np.inf, 1.0]))

    def test_smooth_flattens_at_high_temperature(self):
        dist = select_smooth(np.array([0.3, 0.9, 0.1]), tau=1e6)
        np.testing.assert_allclose(dist.probs, 1.0 / 3.0, atol=1e-4)

    def test_smooth_sharpens_at_low_temperature(self):
        dist = select_smooth(np.array([0.0, 1.0]), tau=1e-3)
        np.testing.assert_allclose(dist.probs, [0.0, 1.0], atol=1e-6)

    def test_equal_scores_exactly_uniform(self):
        dist = select_smooth(np.array([0.4, 0.4, 0.4, 0.4]), tau=0.7)
        np.testing.assert_array_equal(dist.probs, 0.25)

    def test_tau_must_be_positive(self):
        with pytest.raises(ParameterError):
            select_smooth(np.array([0.1, 0.2]), tau=0.0)

    @given(
        tau=st.floats(1e-9, 1e6),
        seed=st.integers(0, 2**16),
    )
    @settings(max_examples=50, deadline=None)
    def test_smooth_never_overflows(self, tau, seed):
        rng = np.random.default_rng(seed)
        scores = rng.uniform(-1e6, 1e6, size=4)
        probs = select_smooth(scores, tau).probs
        assert np.all(np.isfinite(probs))

    def test_softmax_tv_limits_monotone(self):
        scores = np.array([0.1, 0.55, 0.7])
        taus = np.logspace(-4, 6, 30)
        one_hot = np.eye(3)[int(np.argmax(scores))]
        uniform = np.full(3, 1.0 / 3.0)
        tv_sharp = [0.5 * np.abs(softmax(scores, t) - one_hot).sum() for t in taus]
        tv_flat = [0.5 * np.abs(softmax(scores, t) - uniform).sum() for t in taus]
        assert tv_sharp[0] < 1e-6
        assert tv_flat[-1] < 1e-6
        assert all(a <= b + 1e-12 for a, b in zip(tv_sharp, tv_sharp[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(tv_flat, tv_flat[1:]))


class TestDecide:
    def test_single_agent_row_argmax(self):
        E = np.array([[0.9, 0.1, 0.3], [0.1, 0.8, 0.5]])
        s = Strategy(name="bank", kind="single_agent", actor="bank", actor_index=0)
        assert decide(s, E).argmax == 0

    def test_oracle_uses_outcome_map(self):
        # realized "fully repaid" maps to "grant" under the lending-style map
        s = Strategy(
            name="oracle",
            kind="oracle",
            outcome_action_map=((0, 0), (1, 1), (2, 2)),
        )
        dist = decide(s, np.zeros((2, 3)) + 0.5, true_outcome=0)
        assert dist.argmax == 0
        assert decide(s, np.zeros((2, 3)) + 0.5, true_outcome=2).argmax == 2

    def test_oracle_without_truth_is_state_error(self):
        s = Strategy(name="oracle", kind="oracle", outcome_action_map=((0, 0),))
        with pytest.raises(StateError):
            decide(s, np.zeros((2, 2)) + 0.5)

    def test_oracle_per_action_values(self):
        s = Strategy(name="oracle", kind="oracle")
        dist = decide(s, np.zeros((1, 2)) + 0.5, true_outcome=np.array([3.0, 7.0]))
        assert dist.argmax == 1

    def test_agent_agnostic_uses_outcome_probs(self):
        s = Strategy(name="aa", kind="agent_agnostic", desirable_outcome=0)
        probs = np.array([[0.2, 0.8], [0.7, 0.3]])
        dist = decide(s, np.zeros((2, 2)) + 0.5, outcome_probs=probs)
        assert dist.argmax == 1
        with pytest.raises(StateError):
            decide(s, np.zeros((2, 2)) + 0.5)

    def test_nsw_equals_pf_at_argmax_on_positive_matrices(self):
        rng = np.random.default_rng(7)
        nsw = Strategy(name="nsw", kind="compromise", rule=rule("nash_social_welfare"))
        pf = Strategy(name="pf", kind="compromise", rule=rule("proportional_fairness"))
        for _ in range(200):
            E = rng.uniform(0.01, 1.0, size=(3, 4))
            assert decide(nsw, E).argmax == decide(pf, E).argmax


class TestInvariances:
    def test_maximin_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(11)
        r = rule("maximin")
        for _ in range(100):
            E = rng.uniform(0.0, 1.0, size=(3, 4))
            before = int(np.argmax(score_actions(r, E)))
            after = int(np.argmax(score_actions(r, np.sqrt(E))))
            assert before == after

    def test_utilitarian_invariant_to_uniform_row_shift(self):
        rng = np.random.default_rng(13)
        r = rule("utilitarian_sum")
        for _ in range(100):
            E = rng.uniform(0.1, 0.8, size=(3, 4))
            shifted = E.copy()
            shifted[1] += 0.1  # same constant added to one actor across all actions
            assert int(np.argmax(score_actions(r, E))) == int(
                np.argmax(score_actions(r, shifted))
            )

    def test_maximin_guarantee_brute_force(self):
        rng = np.random.default_rng(17)
        r = rule("maximin")
        for _ in range(200):
            E = rng.uniform(0.0, 1.0, size=(4, 6))
            chosen = int(np.argmax(score_actions(r, E)))
            mins = E.min(axis=0)
            assert mins[chosen] >= mins.max() - 1e-12

    def test_pareto_dominated_action_never_selected(self):
        rng = np.random.default_rng(19)
        for _ in range(200):
            n_actors = rng.integers(2, 5)
            dominated = rng.uniform(0.2, 0.6, size=n_actors)
            dominant = dominated + rng.uniform(0.05, 0.2, size=n_actors)
            E = np.stack([dominated, dominant], axis=1)  # dominated at index 0
            d = tuple(E.min(axis=1) - 0.05)
            u = tuple(E.max(axis=1) + 0.05)
            rules = [
                rule("utilitarian_sum"),
                rule("maximin"),
                rule("nash_bargaining", d=d),
                rule("nash_social_welfare"),
                rule("proportional_fairness"),
                rule("kalai_smorodinsky", d=d, u_star=u),
                rule("compromise_programming_l2", u_star=u),
            ]
            for r in rules:
                assert int(np.argmax(score_actions(r, E))) == 1, r.phi


class TestStrategySet:
    def test_unique_names_enforced(self):
        s = Strategy(name="m", kind="compromise", rule=rule("maximin"))
        with pytest.raises(ValidationError):
            StrategySet(strategies=(s, s))

    def test_default_family_covers_all_phis(self):
        names = [s.name for s in default_compromise_strategies()]
        assert names == list(ALL_PHIS)

    def test_json_round_trip(self):
        actors = StakeholderSet(("bank", "applicant"))
        actions = ActionSpace(("g", "n"))
        outcomes = OutcomeSpace.discrete(("good", "bad"))
        s = Strategy(
            name="nbs",
            kind="compromise",
            rule=rule("nash_bargaining", d=(0.1, 0.2), selector="softmax", tau=0.05),
        )
        again = parse_strategy(s.to_json(), actors, actions, outcomes)
        assert again.rule.phi == "nash_bargaining"
        assert again.rule.d == (0.1, 0.2)
        assert again.rule.tau == 0.05

    def test_shorthand_parsing(self):
        actors = StakeholderSet(("bank", "applicant"))
        actions = ActionSpace(("g", "n"))
        outcomes = OutcomeSpace.discrete(("good", "bad"))
        s = parse_strategy_shorthand("single_agent:bank", actors, actions, outcomes)
        assert s.actor_index == 0
        s = parse_strategy_shorthand("nbs", actors, actions, outcomes)
        assert s.rule.phi == "nash_bargaining"
        s = parse_strategy_shorthand("maximin:softmax:0.05", actors, actions, outcomes)
        assert s.rule.selector == "softmax" and s.rule.tau == 0.05
        s = parse_strategy_shorthand("agent_agnostic:good", actors, actions, outcomes)
        assert s.desirable_outcome == 0
        with pytest.raises(ParameterError):
            parse_strategy_shorthand("nonsense", actors, actions, outcomes)


class TestActionDistribution:
    def test_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            ActionDistribution(probs=np.array([0.5, 0.4]))

    def test_one_hot_helper(self):
        dist = ActionDistribution.one_hot(2, 4)
        assert dist.is_one_hot and dist.argmax == 2
