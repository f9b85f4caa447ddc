"""Decision strategies: baselines and game-theoretic compromise rules.

A compromise rule scores every action from the column of stakeholder
utilities it induces, then turns scores into a decision with either a
sharp argmax or a softmax with temperature tau.  All scoring functions
are vectorized over leading batch dimensions: an input of shape
(..., n_actors, n_actions) yields scores of shape (..., n_actions).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .core_model import ActionSpace, ExpectedRewardMatrix, OutcomeSpace, StakeholderSet
from .errors import ParameterError, StateError, ValidationError

DEFAULT_EPS_FLOOR = 1e-9
# Offset below the per-context minimum used for default disagreement points,
# keeping bargaining gains strictly positive on every instance.
DEFAULT_D_OFFSET = 1e-6


@dataclass(frozen=True)
class ActionDistribution:
    """Probability vector over actions; deterministic decisions are one-hot."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValidationError("action distribution must be a non-empty vector")
        if not np.all(np.isfinite(p)) or p.min() < -1e-12:
            raise ValidationError("action distribution must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValidationError(f"action distribution sums to {p.sum()}, not 1")
        object.__setattr__(self, "probs", np.clip(p, 0.0, None))

    @classmethod
    def one_hot(cls, index: int, k: int) -> "ActionDistribution":
        p = np.zeros(k)
        p[index] = 1.0
        return cls(probs=p)

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.probs))

    @property
    def is_one_hot(self) -> bool:
        return bool(np.isclose(self.probs.max(), 1.0))


@dataclass(frozen=True)
class CompromiseRule:
    """Scoring function plus selection operator and its parameters.

    ``d`` (disagreement points) and ``u_star`` (ideal points) default to the
    per-context column extremes: d_i = min_a E[i, a] - 1e-6 and
    u*_i = max_a E[i, a], which keeps bargaining rules well defined on
    every instance.
    """

    phi: str
    selector: str = "argmax"  # "argmax" | "softmax"
    d: tuple[float, ...] | None = None
    u_star: tuple[float, ...] | None = None
    weights: tuple[float, ...] | None = None
    tau: float | None = None
    eps_floor: float = DEFAULT_EPS_FLOOR

    def __post_init__(self):
        if self.phi not in PHI_FUNCTIONS:
            raise ParameterError(
                f"unknown scoring function {self.phi!r}; "
                f"choose from {sorted(PHI_FUNCTIONS)}"
            )
        if self.selector not in ("argmax", "softmax"):
            raise ParameterError(f"unknown selector {self.selector!r}")
        if self.selector == "softmax":
            if self.tau is None or self.tau <= 0:
                raise ParameterError("softmax selector requires tau > 0")
        if self.weights is not None and any(w < 0 for w in self.weights):
            raise ParameterError("weights must be non-negative")
        if self.d is not None and self.u_star is not None:
            for i, (di, ui) in enumerate(zip(self.d, self.u_star)):
                if not di < ui:
                    raise ParameterError(
                        f"disagreement point must stay below ideal point "
                        f"(actor {i}: d={di}, u*={ui})"
                    )

    def with_selector(self, selector: str, tau: float | None = None) -> "CompromiseRule":
        return replace(self, selector=selector, tau=tau)


def _as_column(values: tuple[float, ...] | None, like: np.ndarray) -> np.ndarray | None:
    if values is None:
        return None
    arr = np.asarray(values, dtype=float)
    if arr.shape != (like.shape[-2],):
        raise ParameterError(
            f"per-actor parameter has length {arr.size}, expected {like.shape[-2]}"
        )
    return arr.reshape((1,) * (like.ndim - 2) + (-1, 1))


def _resolve_points(E: np.ndarray, rule: CompromiseRule) -> tuple[np.ndarray, np.ndarray]:
    d = _as_column(rule.d, E)
    if d is None:
        d = E.min(axis=-1, keepdims=True) - DEFAULT_D_OFFSET
    u = _as_column(rule.u_star, E)
    if u is None:
        u = E.max(axis=-1, keepdims=True)
    return d, u


def _phi_utilitarian(E, rule):
    w = _as_column(rule.weights, E)
    return (E if w is None else w * E).sum(axis=-2)


def _phi_maximin(E, rule):
    return E.min(axis=-2)


def _phi_nash_bargaining(E, rule):
    d, _ = _resolve_points(E, rule)
    gains = np.maximum(E - d, rule.eps_floor)
    return gains.prod(axis=-2)


def _phi_nash_social_welfare(E, rule):
    return np.maximum(E, rule.eps_floor).prod(axis=-2)


def _phi_proportional_fairness(E, rule):
    return np.log(np.maximum(E, rule.eps_floor)).sum(axis=-2)


def _phi_kalai_smorodinsky(E, rule):
    d, u = _resolve_points(E, rule)
    span = u - d
    if np.any(span <= 0):
        raise ParameterError(
            "degenerate actor: ideal point does not exceed disagreement point"
        )
    return ((E - d) / span).min(axis=-2)


def _phi_compromise_l2(E, rule):
    _, u = _resolve_points(E, rule)
    w = _as_column(rule.weights, E)
    if w is None:
        w = np.ones_like(E[..., :1])
    dist = np.sqrt((w * (u - E) ** 2).sum(axis=-2))
    return -dist


PHI_FUNCTIONS: Mapping[str, Callable[[np.ndarray, CompromiseRule], np.ndarray]] = {
    "utilitarian_sum": _phi_utilitarian,
    "maximin": _phi_maximin,
    "nash_bargaining": _phi_nash_bargaining,
    "nash_social_welfare": _phi_nash_social_welfare,
    "proportional_fairness": _phi_proportional_fairness,
    "kalai_smorodinsky": _phi_kalai_smorodinsky,
    "compromise_programming_l2": _phi_compromise_l2,
}

PHI_ALIASES = {
    "utilitarian": "utilitarian_sum",
    "nbs": "nash_bargaining",
    "nsw": "nash_social_welfare",
    "pf": "proportional_fairness",
    "ks": "kalai_smorodinsky",
    "cp_l2": "compromise_programming_l2",
}


def canonical_phi(name: str) -> str:
    name = name.strip().lower()
    return PHI_ALIASES.get(name, name)


def score_actions(rule: CompromiseRule, E: np.ndarray | ExpectedRewardMatrix) -> np.ndarray:
    """Scalar score per action; higher is better for every scoring function.

    Distance-based scores (compromise programming) are negated so the same
    selector contract applies across the whole family.
    """
    values = E.values if isinstance(E, ExpectedRewardMatrix) else np.asarray(E, dtype=float)
    if values.ndim < 2:
        raise ValidationError("utility input must have shape (..., actors, actions)")
    if not np.all(np.isfinite(values)):
        raise ValidationError("utility matrix contains NaN or Inf")
    scores = PHI_FUNCTIONS[rule.phi](values, rule)
    if not np.all(np.isfinite(scores)):
        raise ValidationError(f"{rule.phi} produced non-finite scores")
    return scores


def softmax(scores: np.ndarray, tau: float, axis: int = -1) -> np.ndarray:
    """Overflow-safe softmax of scores / tau along the given axis."""
    if tau <= 0:
        raise ParameterError(f"softmax temperature must be positive, got {tau}")
    s = np.asarray(scores, dtype=float) / tau
    s = s - s.max(axis=axis, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=axis, keepdims=True)


def select_sharp(scores: np.ndarray) -> ActionDistribution:
    """One-hot at the maximal score; ties break to the lowest action index."""
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ValidationError("cannot select from an empty action set")
    if not np.all(np.isfinite(s)):
        raise ValidationError("scores must be finite")
    return ActionDistribution.one_hot(int(np.argmax(s)), s.size)


def select_smooth(scores: np.ndarray, tau: float) -> ActionDistribution:
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ValidationError("cannot select from an empty action set")
    return ActionDistribution(probs=softmax(s, tau))


def apply_rule(rule: CompromiseRule, E: np.ndarray | ExpectedRewardMatrix) -> ActionDistribution:
    scores = score_actions(rule, E)
    if rule.selector == "softmax":
        return select_smooth(scores, rule.tau)  # type: ignore[arg-type]
    return select_sharp(scores)


@dataclass(frozen=True)
class Strategy:
    """Named decision strategy: baseline or compromise rule.

    kinds:
      agent_agnostic  - argmax of the predicted probability of the
                        designated desirable outcome (ignores rewards)
      single_agent    - argmax of one actor's expected-reward row
      oracle          - test-time map from the realized outcome to its
                        designated optimal action
      compromise      - scoring function + selector over the full matrix
    """

    name: str
    kind: str
    actor: str | None = None
    actor_index: int | None = None
    desirable_outcome: int | None = None
    outcome_action_map: tuple[tuple[int, int], ...] | None = None
    rule: CompromiseRule | None = None

    def __post_init__(self):
        if self.kind not in ("agent_agnostic", "single_agent", "oracle", "compromise"):
            raise ParameterError(f"unknown strategy kind {self.kind!r}")
        if self.kind == "single_agent" and self.actor_index is None:
            raise ParameterError("single_agent strategy needs an actor index")
        if self.kind == "agent_agnostic" and self.desirable_outcome is None:
            raise ParameterError("agent_agnostic strategy needs a desirable outcome")
        if self.kind == "compromise" and self.rule is None:
            raise ParameterError("compromise strategy needs a rule")

    @property
    def is_compromise(self) -> bool:
        return self.kind == "compromise"

    def to_json(self) -> dict:
        out: dict = {"name": self.name, "kind": self.kind}
        if self.actor is not None:
            out["actor"] = self.actor
        if self.desirable_outcome is not None:
            out["desirable_outcome"] = self.desirable_outcome
        if self.outcome_action_map is not None:
            out["outcome_action_map"] = {str(o): a for o, a in self.outcome_action_map}
        if self.rule is not None:
            out["phi"] = self.rule.phi
            out["selector"] = self.rule.selector
            params: dict = {"eps_floor": self.rule.eps_floor}
            if self.rule.d is not None:
                params["d"] = list(self.rule.d)
            if self.rule.u_star is not None:
                params["u_star"] = list(self.rule.u_star)
            if self.rule.weights is not None:
                params["weights"] = list(self.rule.weights)
            if self.rule.tau is not None:
                params["tau"] = self.rule.tau
            out["params"] = params
        return out


def decide(
    strategy: Strategy,
    E: np.ndarray | ExpectedRewardMatrix,
    outcome_probs: np.ndarray | None = None,
    true_outcome: int | np.ndarray | None = None,
) -> ActionDistribution:
    """Apply one strategy to one context.

    ``outcome_probs`` (|A| x |O|) is required for agent-agnostic strategies;
    ``true_outcome`` is required for the oracle (test-time only): either a
    discrete outcome index resolved through the strategy's outcome-action
    map, or a per-action ground-truth value vector to argmax directly.
    """
    values = E.values if isinstance(E, ExpectedRewardMatrix) else np.asarray(E, dtype=float)
    k = values.shape[-1]
    if strategy.kind == "single_agent":
        return select_sharp(values[strategy.actor_index])
    if strategy.kind == "agent_agnostic":
        if outcome_probs is None:
            raise StateError("agent_agnostic strategy needs outcome probabilities")
        probs = np.asarray(outcome_probs, dtype=float)
        return select_sharp(probs[:, strategy.desirable_outcome])
    if strategy.kind == "oracle":
        if true_outcome is None:
            raise StateError("oracle strategy invoked without a ground-truth outcome")
        if strategy.outcome_action_map is not None:
            mapping = dict(strategy.outcome_action_map)
            o = int(true_outcome)  # type: ignore[arg-type]
            if o not in mapping:
                raise ValidationError(f"oracle map has no entry for outcome {o}")
            return ActionDistribution.one_hot(mapping[o], k)
        truth = np.asarray(true_outcome, dtype=float)
        if truth.shape != (k,):
            raise StateError(
                "oracle without an outcome-action map needs a per-action "
                f"ground-truth vector of length {k}"
            )
        return select_sharp(truth)
    return apply_rule(strategy.rule, values)  # type: ignore[arg-type]


@dataclass(frozen=True)
class StrategySet:
    """Ordered strategy collection; order breaks ties in selection."""

    strategies: tuple[Strategy, ...]

    def __post_init__(self):
        names = [s.name for s in self.strategies]
        if len(set(names)) != len(names):
            raise ValidationError("strategy names must be unique")
        if not names:
            raise ValidationError("strategy set must not be empty")

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.strategies]

    def __iter__(self):
        return iter(self.strategies)

    def __len__(self):
        return len(self.strategies)

    def compromise_strategies(self) -> list[Strategy]:
        return [s for s in self.strategies if s.is_compromise]


ALL_PHIS = tuple(PHI_FUNCTIONS)


def default_compromise_strategies(
    selector: str = "argmax", tau: float | None = None
) -> list[Strategy]:
    """One strategy per scoring function, with default rule parameters."""
    return [
        Strategy(name=phi, kind="compromise", rule=CompromiseRule(phi=phi, selector=selector, tau=tau))
        for phi in ALL_PHIS
    ]


def parse_strategy(
    obj: dict,
    actors: StakeholderSet,
    actions: ActionSpace,
    outcomes: OutcomeSpace,
) -> Strategy:
    """Build a Strategy from its JSON form, resolving actor names to indices."""
    kind = obj.get("kind")
    name = obj.get("name") or kind
    if kind == "single_agent":
        actor = obj["actor"]
        return Strategy(
            name=name if name != kind else f"single_agent:{actor}",
            kind=kind,
            actor=actor,
            actor_index=actors.index(actor),
        )
    if kind == "agent_agnostic":
        outcome = obj["desirable_outcome"]
        if isinstance(outcome, str):
            outcome = list(outcomes.labels).index(outcome)
        return Strategy(name=name, kind=kind, desirable_outcome=int(outcome))
    if kind == "oracle":
        mapping = obj.get("outcome_action_map")
        pairs = None
        if mapping is not None:
            pairs = tuple(sorted((int(o), int(a)) for o, a in mapping.items()))
        return Strategy(name=name, kind=kind, outcome_action_map=pairs)
    if kind == "compromise":
        params = obj.get("params", {})
        rule = CompromiseRule(
            phi=canonical_phi(obj["phi"]),
            selector=obj.get("selector", "argmax"),
            d=tuple(params["d"]) if "d" in params else None,
            u_star=tuple(params["u_star"]) if "u_star" in params else None,
            weights=tuple(params["weights"]) if "weights" in params else None,
            tau=params.get("tau"),
            eps_floor=params.get("eps_floor", DEFAULT_EPS_FLOOR),
        )
        return Strategy(name=name if name != kind else rule.phi, kind=kind, rule=rule)
    raise ParameterError(f"unknown strategy kind {kind!r}")


def parse_strategy_shorthand(
    text: str,
    actors: StakeholderSet,
    actions: ActionSpace,
    outcomes: OutcomeSpace,
    oracle_map: Mapping[int, int] | None = None,
) -> Strategy:
    """Parse CLI shorthand like ``single_agent:bank`` or ``maximin:softmax:0.05``."""
    parts = text.strip().split(":")
    head = parts[0]
    if head == "oracle":
        pairs = None
        if oracle_map is not None:
            pairs = tuple(sorted((int(o), int(a)) for o, a in oracle_map.items()))
        return Strategy(name="oracle", kind="oracle", outcome_action_map=pairs)
    if head == "single_agent":
        if len(parts) != 2:
            raise ParameterError(f"expected single_agent:<actor>, got {text!r}")
        return Strategy(
            name=text,
            kind="single_agent",
            actor=parts[1],
            actor_index=actors.index(parts[1]),
        )
    if head == "agent_agnostic":
        if len(parts) != 2:
            raise ParameterError(f"expected agent_agnostic:<outcome>, got {text!r}")
        outcome = parts[1]
        idx = (
            list(outcomes.labels).index(outcome)
            if outcome in outcomes.labels
            else int(outcome)
        )
        return Strategy(name=text, kind="agent_agnostic", desirable_outcome=idx)
    phi = canonical_phi(head)
    if phi in PHI_FUNCTIONS:
        selector = "argmax"
        tau = None
        if len(parts) >= 2:
            selector = parts[1]
            if selector == "softmax":
                if len(parts) != 3:
                    raise ParameterError(f"softmax shorthand needs a temperature: {text!r}")
                tau = float(parts[2])
        return Strategy(
            name=text,
            kind="compromise",
            rule=CompromiseRule(phi=phi, selector=selector, tau=tau),
        )
    raise ParameterError(f"cannot parse strategy shorthand {text!r}")
