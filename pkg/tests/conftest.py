"""Shared builders for randomized robustness instances."""

import numpy as np

from concord.evaluation import Metric, MetricInputs, accuracy_metric, value_metric
from concord.robustness import RuleScorer
from concord.strategies import CompromiseRule


def random_instance(rng, n_contexts=3, n_actors=3, n_actions=3, mu=0.05):
    """Random tube-interior tensor plus frozen ground truth for metrics.

    Entries live in [0.2, 0.8], leaving slack >= 0.15 so that any radius
    up to 0.1 is feasible.  Ground truth: a random optimal action per
    context (for the accuracy metric) and the true mean stakeholder
    welfare per action (for the expected-welfare metric), both fixed at
    construction so perturbations only move the decisions.
    """
    tensor = rng.uniform(0.2, 0.8, size=(n_contexts, n_actors, n_actions))
    truths = rng.integers(0, n_actions, size=n_contexts)
    welfare = tensor.mean(axis=1)
    inputs = MetricInputs(truths=truths, groups=None, per_action_values=welfare)
    metrics = [
        accuracy_metric({a: a for a in range(n_actions)}),
        value_metric("Expected_Welfare", bounds=(0.0, 1.0)),
    ]
    weights = np.array([0.6, 0.4])
    return tensor, metrics, weights, inputs


def scorer_for(phi, metrics, weights, inputs, mu=0.05):
    return RuleScorer(CompromiseRule(phi=phi), metrics, weights, inputs, mu=mu)
