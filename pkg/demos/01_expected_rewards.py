"""From predictions to an expected-reward matrix.

Walks the core objects: stakeholder/action/outcome spaces, per-actor
predicted reward matrices, the outcome distribution, and the expected
reward matrix that every decision strategy consumes.
"""

import numpy as np

from concord import (
    ActionSpace,
    OutcomeSpace,
    PredictedRewardMatrix,
    RewardTensor,
    StakeholderSet,
    build_expected_reward_matrix,
    clip_to_tube,
)

actors = StakeholderSet(("bank", "applicant", "regulator"))
actions = ActionSpace(("grant", "grant_lower", "not_grant"))
outcomes = OutcomeSpace.discrete(("fully_repaid", "partially_repaid", "not_repaid"))

print(f"{actors.n} actors x {actions.k} actions x {outcomes.m} outcomes")

# Each actor holds a desirability score for every (action, outcome) pair.
# In the full pipeline these come from learned reward models; here they
# are written down directly.
q_bank = PredictedRewardMatrix(
    actor="bank",
    values=np.array([[1.0, 0.7, 0.0], [0.75, 0.63, 0.25], [0.5, 0.5, 0.5]]),
)
q_applicant = PredictedRewardMatrix(
    actor="applicant",
    values=np.array([[1.0, 0.6, 0.05], [0.7, 0.5, 0.15], [0.45, 0.45, 0.45]]),
)
q_regulator = PredictedRewardMatrix(
    actor="regulator",
    values=np.array([[0.85, 0.4, 0.05], [0.85, 0.65, 0.3], [0.5, 0.5, 0.5]]),
)

# The outcome model's view of one applicant: rows are actions, columns are
# repayment states.  Row-stochastic: each row is a distribution.
outcome_probs = np.array(
    [
        [0.55, 0.30, 0.15],
        [0.55, 0.30, 0.15],
        [0.55, 0.30, 0.15],
    ]
)

E = build_expected_reward_matrix(
    None, outcome_probs, [q_bank, q_applicant, q_regulator], actors=actors
)
print("\nexpected reward matrix E (rows: actors, columns: actions):")
for i, actor in enumerate(actors.actors):
    row = "  ".join(f"{v:.3f}" for v in E.values[i])
    print(f"  {actor:<10} {row}")

# Every actor's favorite action, read straight off the rows:
for i, actor in enumerate(actors.actors):
    best = actions.actions[int(np.argmax(E.values[i]))]
    print(f"{actor} alone would pick: {best}")

# Robustness analysis works on batches of these matrices, clipped into an
# interior tube so log-based rules and curvature stay controlled.
tensor = RewardTensor.from_matrices([E])
clipped = clip_to_tube(tensor, mu=0.05)
print(f"\ntube-clipped tensor range: [{clipped.values.min():.3f}, {clipped.values.max():.3f}]")
