"""End-to-end lending run through the library API.

Generates a synthetic reward-augmented lending dataset, cross-validates
the whole strategy set (baselines + compromise rules) on the case
metrics, and recommends an action for a fresh applicant with the full
accountability trace: the expected-reward matrix, every strategy's pick,
and the winning rule's per-action scores.
"""

import numpy as np

from concord import LearnerConfig, cross_validate_select, generate_lending
from concord.evaluation import action_entropy
from concord.learners import fit_outcome_model, fit_reward_model
from concord.core_model import build_expected_reward_tensor
from concord.scenarios import ScenarioSpec, case_metrics
from concord.strategies import Strategy, StrategySet, decide, default_compromise_strategies, score_actions

spec = ScenarioSpec(name="lending", n_rows=1200, seed=0, noise=0.05)
gen = generate_lending(spec)
augmented = gen.augmented
print(f"generated {augmented.n} applications; actors = {augmented.actors.actors}")

strategies = StrategySet(
    strategies=tuple(
        [
            Strategy(name="oracle", kind="oracle", outcome_action_map=((0, 0), (1, 1), (2, 2))),
            Strategy(name="agent_agnostic", kind="agent_agnostic", desirable_outcome=0),
        ]
        + [
            Strategy(name=f"single_agent:{a}", kind="single_agent", actor=a, actor_index=i)
            for i, a in enumerate(augmented.actors.actors)
        ]
        + default_compromise_strategies()
    )
)
metrics = case_metrics("lending")
config = LearnerConfig(kind="forest", trees=25, max_depth=8)

result = cross_validate_select(
    augmented.base,
    augmented,
    strategies,
    metrics,
    k_folds=3,
    seed=0,
    outcome_config=config,
    reward_grid=[config],
)

print(f"\n{'strategy':<30} {'composite':>9}  {'profit':>7} {'parity':>7} {'entropy':>7}")
for name in result.strategy_names:
    profit = np.mean([fr.raw[name]["Total_Profit"] for fr in result.folds])
    parity = np.mean([fr.raw[name]["Demographic_Parity"] for fr in result.folds])
    entropy = np.mean([action_entropy(fr.decisions[name]) for fr in result.folds])
    mark = "  <-" if name == result.selected else ""
    print(
        f"{name:<30} {result.mean_composite[name]:>9.4f}  "
        f"{profit:>7.3f} {parity:>7.3f} {entropy:>7.3f}{mark}"
    )

# Deployment: refit on everything, then score a fresh applicant.
outcome_model, _ = fit_outcome_model(augmented.base, config, seed=0)
reward_models = {
    actor: fit_reward_model(augmented, actor, [config], seed=0)[0]
    for actor in augmented.actors.actors
}
fresh = np.array([[0.45, 0.40, 0.55, 1.0]])  # credit, income, debt, group
probs = outcome_model.predict_proba_all_actions(fresh)
stack = np.stack([reward_models[a].predict_matrix_batch(fresh) for a in augmented.actors.actors], axis=1)
E = build_expected_reward_tensor(probs, stack).values[0]

print("\nfresh applicant, expected rewards (rows: actors):")
for i, actor in enumerate(augmented.actors.actors):
    print(f"  {actor:<10} " + "  ".join(f"{v:.3f}" for v in E[i]))

deployable = [s for s in strategies if s.kind != "oracle"]
winner = max(deployable, key=lambda s: result.mean_composite[s.name])
dist = decide(winner, E, outcome_probs=probs[0])
chosen = augmented.base.schema.actions.actions[dist.argmax]
print(f"\ndeployed strategy: {winner.name} -> {chosen}")
if winner.is_compromise:
    print("per-action rule scores:", np.round(score_actions(winner.rule, E), 4))
