"""The compromise-rule family on one contested instance.

Two actions split the room: action 0 is great for actor 0 and bad for
actor 1, action 1 is the reverse but less extreme.  Each scoring function
resolves the conflict by its own normative principle; the selector then
turns scores into a decision, either sharply (argmax) or smoothly
(softmax with temperature).
"""

import numpy as np

from concord import CompromiseRule, select_smooth, score_actions
from concord.strategies import ALL_PHIS, apply_rule

E = np.array(
    [
        [0.80, 0.55],  # actor 0
        [0.25, 0.60],  # actor 1
        [0.50, 0.58],  # actor 2
    ]
)

print("utilities (rows: actors, columns: actions):")
print(E, "\n")

print(f"{'rule':<28} {'score(a0)':>10} {'score(a1)':>10}  winner")
for phi in ALL_PHIS:
    rule = CompromiseRule(phi=phi)
    scores = score_actions(rule, E)
    dist = apply_rule(rule, E)
    print(f"{phi:<28} {scores[0]:>10.4f} {scores[1]:>10.4f}  action {dist.argmax}")

# Softmax selection keeps a full distribution over actions; lowering the
# temperature recovers the sharp choice, raising it spreads the decision.
rule = CompromiseRule(phi="utilitarian_sum")
scores = score_actions(rule, E)
print("\nsoftmax selection for the utilitarian scores:")
for tau in (0.01, 0.1, 0.5, 5.0):
    probs = select_smooth(scores, tau).probs
    print(f"  tau={tau:<5} -> p = [{probs[0]:.4f}, {probs[1]:.4f}]")
