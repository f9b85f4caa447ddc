"""Synthetic scenario generators and their case-specific metrics.

Two scenario families mirror common high-stakes settings: a three-action
lending problem (Grant / Grant lower amount / Not Grant over repayment
states) and a two-action treatment problem with continuous cognitive
scores.  Actor reward heuristics are versioned numeric tables chosen to
satisfy the documented qualitative orderings; uniform noise simulates
elicitation variability.  Generation is a pure function of (spec, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core_model import (
    ActionSpace,
    AugmentedDataset,
    Dataset,
    DatasetSchema,
    OutcomeSpace,
    StakeholderSet,
)
from .errors import SchemaError, ValidationError
from .evaluation import (
    Metric,
    MetricInputs,
    accuracy_metric,
    demographic_parity_metric,
    precision_macro_metric,
    value_metric,
)
from .seeding import substream

SCENARIO_SCHEMA = "concord.scenario/1"

LENDING_ACTIONS = ("grant", "grant_lower", "not_grant")
LENDING_OUTCOMES = ("fully_repaid", "partially_repaid", "not_repaid")
LENDING_ACTORS = ("bank", "applicant", "regulator")

# Designated optimal action for each realized repayment state.
LENDING_ORACLE_MAP = {0: 0, 1: 1, 2: 2}

# Net profit / gross loss per (action, outcome), on a unit-loan scale.
# Default on a full grant costs more than a repaid loan earns.
LENDING_PROFIT = np.array(
    [
        [1.0, 0.4, -1.2],
        [0.45, 0.25, -0.55],
        [0.0, 0.0, 0.0],
    ]
)
LENDING_LOSS = np.array(
    [
        [0.0, 0.45, 1.0],
        [0.0, 0.2, 0.5],
        [0.0, 0.0, 0.0],
    ]
)

# Actor reward tables, (action, outcome), balanced variant.  The bank table
# is the affine map of net profit into [0, 1], so the bank baseline chases
# expected profit exactly.
LENDING_REWARDS_BALANCED = {
    "bank": (LENDING_PROFIT + 1.2) / 2.2,
    "applicant": np.array(
        [
            [1.0, 0.6, 0.05],
            [0.7, 0.5, 0.15],
            [0.45, 0.45, 0.45],
        ]
    ),
    "regulator": np.array(
        [
            [0.85, 0.4, 0.05],
            [0.85, 0.65, 0.3],
            [0.5, 0.5, 0.5],
        ]
    ),
}

# Strictest variant: the bank only values approvals that fully repay, the
# applicant values approval regardless of repayment.
LENDING_REWARDS_STRICTEST = {
    "bank": np.array(
        [
            [1.0, 0.0, 0.0],
            [0.6, 0.0, 0.0],
            [0.5, 0.5, 0.5],
        ]
    ),
    "applicant": np.array(
        [
            [1.0, 1.0, 1.0],
            [0.6, 0.6, 0.6],
            [0.0, 0.0, 0.0],
        ]
    ),
    "regulator": LENDING_REWARDS_BALANCED["regulator"],
}

# Regulator inclusion bonus on granting actions for the protected group.
LENDING_INCLUSION_BONUS = 0.25

HEALTHCARE_ACTIONS = ("no_treatment", "treatment")
HEALTHCARE_ACTORS = ("provider", "policy_maker", "parent")
HEALTHCARE_OUTCOME_RANGE = (0.0, 10.0)
HEALTHCARE_BIN_EDGES = tuple(np.linspace(0.0, 10.0, 11))


@dataclass(frozen=True)
class ScenarioSpec:
    """Declarative description of one synthetic scenario."""

    name: str
    n_rows: int
    seed: int = 0
    noise: float = 0.05  # uniform reward noise amplitude
    variant: str = "balanced"  # lending: "balanced" | "strictest"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in ("lending", "healthcare"):
            raise ValidationError(f"unknown scenario {self.name!r}")
        if self.n_rows < 1:
            raise ValidationError("n_rows must be positive")
        if not (0.0 <= self.noise <= 0.5):
            raise ValidationError(f"noise amplitude must lie in [0, 0.5], got {self.noise}")
        if self.variant not in ("balanced", "strictest"):
            raise ValidationError(f"unknown reward variant {self.variant!r}")

    def to_json(self) -> dict:
        return {
            "schema": SCENARIO_SCHEMA,
            "name": self.name,
            "n_rows": self.n_rows,
            "seed": self.seed,
            "noise": self.noise,
            "variant": self.variant,
            "params": dict(self.params),
        }


def parse_scenario_spec(obj: dict) -> ScenarioSpec:
    """Validate a scenario-spec JSON document; errors carry JSON pointers."""
    if not isinstance(obj, dict):
        raise SchemaError("/: scenario spec must be a JSON object")
    if obj.get("schema") != SCENARIO_SCHEMA:
        raise SchemaError(f"/schema: expected {SCENARIO_SCHEMA!r}, got {obj.get('schema')!r}")
    name = obj.get("name")
    if name not in ("lending", "healthcare"):
        raise SchemaError(f"/name: expected lending|healthcare, got {name!r}")
    n_rows = obj.get("n_rows")
    if not isinstance(n_rows, int) or n_rows < 1:
        raise SchemaError(f"/n_rows: expected positive integer, got {n_rows!r}")
    seed = obj.get("seed", 0)
    if not isinstance(seed, int):
        raise SchemaError(f"/seed: expected integer, got {seed!r}")
    noise = obj.get("noise", 0.05)
    if not isinstance(noise, (int, float)) or not (0.0 <= noise <= 0.5):
        raise SchemaError(f"/noise: expected number in [0, 0.5], got {noise!r}")
    variant = obj.get("variant", "balanced")
    if variant not in ("balanced", "strictest"):
        raise SchemaError(f"/variant: expected balanced|strictest, got {variant!r}")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise SchemaError(f"/params: expected object, got {type(params).__name__}")
    return ScenarioSpec(
        name=name, n_rows=n_rows, seed=seed, noise=float(noise), variant=variant, params=params
    )


@dataclass
class GeneratedScenario:
    """Generator output: augmented data plus the ground truth behind it."""

    spec: ScenarioSpec
    augmented: AugmentedDataset
    ground_truth: dict  # oracle mappings, true effects, reward tables

    @property
    def per_action_truths(self) -> np.ndarray | None:
        pat = self.ground_truth.get("per_action_truths")
        return None if pat is None else np.asarray(pat, dtype=float)


# ---------------------------------------------------------------------------
# lending


def _lending_schema() -> DatasetSchema:
    return DatasetSchema(
        feature_names=("credit_score", "income", "debt_ratio", "group"),
        actions=ActionSpace(LENDING_ACTIONS),
        outcomes=OutcomeSpace.discrete(LENDING_OUTCOMES),
        actors=StakeholderSet(LENDING_ACTORS),
        group_column="group",
    )


def lending_reward_tables(variant: str) -> Mapping[str, np.ndarray]:
    return LENDING_REWARDS_STRICTEST if variant == "strictest" else LENDING_REWARDS_BALANCED


def _lending_risk(features: np.ndarray) -> np.ndarray:
    credit, income, debt = features[:, 0], features[:, 1], features[:, 2]
    return 6.0 * (credit - 0.55) + 1.5 * (income - 0.5) - 2.0 * (debt - 0.4)


def _lending_outcome_probs(risk: np.ndarray, intercept: float) -> np.ndarray:
    """Ordered-logit distribution over repayment states.

    The outcome is the applicant's repayment behavior at the full amount,
    independent of the recorded action, so profits and losses of any
    decision can be priced against it.  Risk mitigation from the lower
    amount lives in the profit/loss and reward tables instead.
    """
    u = risk + intercept
    p_full = _sigmoid(u - 0.5)
    p_full_or_part = _sigmoid(u + 0.9)
    return np.stack([p_full, p_full_or_part - p_full, 1.0 - p_full_or_part], axis=1)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def _calibrate_intercept(risk: np.ndarray, target: float) -> float:
    lo, hi = -10.0, 10.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        rate = float(_lending_outcome_probs(risk, mid)[:, 0].mean())
        if rate < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def lending_reward(
    actor: str,
    actions: np.ndarray,
    outcomes: np.ndarray,
    groups: np.ndarray,
    variant: str = "balanced",
) -> np.ndarray:
    """Noise-free heuristic reward for one actor across rows."""
    table = lending_reward_tables(variant)[actor]
    base = table[actions, outcomes]
    if actor == "regulator":
        bonus = LENDING_INCLUSION_BONUS * (groups == 1) * (actions != 2)
        base = np.clip(base + bonus, 0.0, 1.0)
    return base


def generate_lending(spec: ScenarioSpec) -> GeneratedScenario:
    """Synthesize a reward-augmented lending dataset.

    Features: credit score, income, debt ratio in [0, 1] and a binary
    protected group whose credit distribution is shifted down, so group
    disparities emerge through a proxy rather than the group code itself.
    Historical actions are uniform (exploration data), repayment follows
    an ordered-logit model of risk, and actor rewards come from the
    variant's tables plus uniform noise, clipped to [0, 1].
    """
    if spec.name != "lending":
        raise ValidationError(f"expected a lending spec, got {spec.name!r}")
    n = spec.n_rows
    rng = substream(spec.seed, "lending-features")
    group = (rng.random(n) < 0.35).astype(int)
    credit = np.clip(rng.normal(0.6, 0.16, n) - 0.15 * group, 0.0, 1.0)
    income = np.clip(rng.normal(0.5, 0.18, n) - 0.05 * group, 0.0, 1.0)
    debt = np.clip(rng.beta(2.0, 3.0, n), 0.0, 1.0)
    features = np.column_stack([credit, income, debt, group.astype(float)])

    actions = substream(spec.seed, "lending-actions").integers(0, 3, n)
    risk = _lending_risk(features)
    target = spec.params.get("full_repay_rate")
    intercept = (
        _calibrate_intercept(risk, float(target))
        if target is not None
        else float(spec.params.get("intercept", 0.0))
    )
    probs = _lending_outcome_probs(risk, intercept)
    draws = substream(spec.seed, "lending-outcomes").random(n)
    outcomes = (draws[:, None] > probs.cumsum(axis=1)).sum(axis=1)

    noise_rng = substream(spec.seed, "lending-reward-noise")
    rewards = np.empty((n, len(LENDING_ACTORS)))
    for j, actor in enumerate(LENDING_ACTORS):
        clean = lending_reward(actor, actions, outcomes, group, spec.variant)
        noisy = clean + noise_rng.uniform(-spec.noise, spec.noise, n)
        rewards[:, j] = np.clip(noisy, 0.0, 1.0)

    dataset = Dataset(
        schema=_lending_schema(),
        features=features,
        actions=actions,
        outcomes=outcomes,
        groups=group,
    )
    augmented = AugmentedDataset(base=dataset, rewards=rewards)
    tables = lending_reward_tables(spec.variant)
    ground_truth = {
        "oracle_map": {str(k): v for k, v in LENDING_ORACLE_MAP.items()},
        "intercept": intercept,
        "profit_table": LENDING_PROFIT.tolist(),
        "loss_table": LENDING_LOSS.tolist(),
        "reward_tables": {a: t.tolist() for a, t in tables.items()},
        "positive_actions": [0, 1],
        "per_action_truths": None,
    }
    return GeneratedScenario(spec=spec, augmented=augmented, ground_truth=ground_truth)


# ---------------------------------------------------------------------------
# healthcare


def _healthcare_schema() -> DatasetSchema:
    names = tuple(
        [f"x{i}" for i in range(6)] + ["group"] + [f"b{i}" for i in range(1, 19)]
    )
    return DatasetSchema(
        feature_names=names,
        actions=ActionSpace(HEALTHCARE_ACTIONS),
        outcomes=OutcomeSpace.continuous(HEALTHCARE_BIN_EDGES),
        actors=StakeholderSet(HEALTHCARE_ACTORS),
        group_column="group",
    )


def generate_healthcare(spec: ScenarioSpec) -> GeneratedScenario:
    """Synthesize a treatment-effect dataset with known ground truth.

    25 mixed features; the outcome is baseline(x) plus treatment times a
    stored effect(x) plus noise, clipped to the declared score range.
    Both potential outcomes and the effect function are kept in the
    ground truth for oracle evaluation.
    """
    if spec.name != "healthcare":
        raise ValidationError(f"expected a healthcare spec, got {spec.name!r}")
    n = spec.n_rows
    rng = substream(spec.seed, "healthcare-features")
    cont = rng.normal(0.0, 1.0, (n, 6))
    group = (rng.random(n) < 0.4).astype(int)
    binary = (rng.random((n, 18)) < rng.uniform(0.2, 0.8, 18)).astype(float)
    features = np.column_stack([cont, group.astype(float), binary])

    baseline = np.clip(
        5.0
        + 1.2 * cont[:, 0]
        - 0.8 * cont[:, 1]
        + 0.5 * cont[:, 2]
        - 0.7 * group
        + 0.4 * binary[:, 0]
        - 0.3 * binary[:, 1],
        *HEALTHCARE_OUTCOME_RANGE,
    )
    effect_param = spec.params.get("effect", "heterogeneous")
    if effect_param == "heterogeneous":
        effect = 1.0 + 0.6 * np.tanh(cont[:, 0]) + 0.5 * group - 0.3 * binary[:, 2]
    else:
        effect = np.full(n, float(effect_param))

    outcome_noise = float(spec.params.get("outcome_noise", 0.3))
    eta = substream(spec.seed, "healthcare-outcome-noise").normal(0.0, outcome_noise, n)
    lo, hi = HEALTHCARE_OUTCOME_RANGE
    y0 = np.clip(baseline + eta, lo, hi)
    y1 = np.clip(baseline + effect + eta, lo, hi)
    actions = (substream(spec.seed, "healthcare-assignment").random(n) < 0.5).astype(int)
    outcomes = np.where(actions == 1, y1, y0)

    cost = float(spec.params.get("cost", 0.1))
    equity = float(spec.params.get("equity_bonus", 0.25))
    norm0 = (y0 - lo) / (hi - lo)
    norm1 = (y1 - lo) / (hi - lo)
    norm_y = np.where(actions == 1, norm1, norm0)

    noise_rng = substream(spec.seed, "healthcare-reward-noise")

    def noisy(clean: np.ndarray) -> np.ndarray:
        return np.clip(clean + noise_rng.uniform(-spec.noise, spec.noise, n), 0.0, 1.0)

    provider = noisy(np.clip(norm_y - cost * (actions == 1), 0.0, 1.0))
    policy = noisy(np.clip(norm_y * (1.0 + equity * group), 0.0, 1.0))
    parent = noisy(norm_y)
    rewards = np.column_stack([provider, policy, parent])

    dataset = Dataset(
        schema=_healthcare_schema(),
        features=features,
        actions=actions,
        outcomes=outcomes,
        groups=group,
    )
    augmented = AugmentedDataset(base=dataset, rewards=rewards)
    ground_truth = {
        "effect": effect.tolist(),
        "y0": y0.tolist(),
        "y1": y1.tolist(),
        "per_action_truths": np.column_stack([y0, y1]).tolist(),
        "cost": cost,
        "equity_bonus": equity,
        "oracle_map": None,
    }
    return GeneratedScenario(spec=spec, augmented=augmented, ground_truth=ground_truth)


def generate(spec: ScenarioSpec) -> GeneratedScenario:
    if spec.name == "lending":
        return generate_lending(spec)
    return generate_healthcare(spec)


# ---------------------------------------------------------------------------
# case-specific metrics


def _ratio_table_metric(
    name: str, table: np.ndarray, orientation: str, bounds
) -> Metric:
    """Realized table value under the decisions over the per-row attainable max."""

    def batch(probs: np.ndarray, inputs: MetricInputs) -> np.ndarray:
        o = np.asarray(inputs.truths).astype(int)
        per_row = table[:, o].T  # (n, |A|)
        realized = np.einsum("...na,na->...n", probs, per_row).sum(axis=-1)
        potential = per_row.max(axis=1).sum()
        if potential <= 1e-12:
            return np.zeros(realized.shape)
        return realized / potential

    return Metric(name=name, orientation=orientation, batch=batch, bounds=bounds)


def _share_metric(name: str, action: int) -> Metric:
    def kernel(a: int, inputs: MetricInputs) -> np.ndarray:
        return np.full(len(inputs.truths), 1.0 if a == action else 0.0)

    return Metric(
        name=name, orientation="higher", kernel=kernel, bounds=(0.0, 1.0), report_only=True
    )


def lending_metrics() -> list[Metric]:
    """The seven lending evaluation criteria."""
    return [
        accuracy_metric(LENDING_ORACLE_MAP),
        precision_macro_metric(LENDING_ORACLE_MAP, len(LENDING_ACTIONS)),
        demographic_parity_metric(positive_actions=(0, 1)),
        _ratio_table_metric("Total_Profit", LENDING_PROFIT, "higher", None),
        _ratio_table_metric("Total_Loss", LENDING_LOSS, "lower", (0.0, 1.0)),
        _share_metric("Percent_Grant", 0),
        _share_metric("Percent_Grant_Lower", 1),
    ]


def _mean_outcome_metric(name: str, arm: int) -> Metric:
    lo, hi = HEALTHCARE_OUTCOME_RANGE

    def batch(probs: np.ndarray, inputs: MetricInputs) -> np.ndarray:
        values = np.asarray(inputs.per_action_values, dtype=float)[:, arm]
        weight = probs[..., arm]
        mass = weight.sum(axis=-1)
        totals = weight @ values
        return np.where(mass > 1e-12, totals / np.maximum(mass, 1e-12), 0.0)

    return Metric(name=name, orientation="higher", batch=batch, bounds=(lo, hi))


def _avg_outcome_difference_metric() -> Metric:
    lo, hi = HEALTHCARE_OUTCOME_RANGE

    def batch(probs: np.ndarray, inputs: MetricInputs) -> np.ndarray:
        pav = np.asarray(inputs.per_action_values, dtype=float)
        w1, w0 = probs[..., 1], probs[..., 0]
        m1, m0 = w1.sum(axis=-1), w0.sum(axis=-1)
        t = np.where(m1 > 1e-12, (w1 @ pav[:, 1]) / np.maximum(m1, 1e-12), 0.0)
        c = np.where(m0 > 1e-12, (w0 @ pav[:, 0]) / np.maximum(m0, 1e-12), 0.0)
        return t - c

    return Metric(
        name="Avg_outcome_difference",
        orientation="higher",
        batch=batch,
        bounds=(lo - hi, hi - lo),
    )


def _cost_effectiveness_metric(cost: float) -> Metric:
    def batch(probs: np.ndarray, inputs: MetricInputs) -> np.ndarray:
        pav = np.asarray(inputs.per_action_values, dtype=float)
        gain = pav[:, 1] - pav[:, 0]
        w1 = probs[..., 1]
        mass = w1.sum(axis=-1)
        avg_gain = np.where(mass > 1e-12, (w1 @ gain) / np.maximum(mass, 1e-12), 0.0)
        return avg_gain / cost

    return Metric(name="Cost_Effectiveness", orientation="higher", batch=batch, bounds=None)


def healthcare_metrics(cost: float = 0.1) -> list[Metric]:
    return [
        _share_metric("Percentage_Treated", 1),
        _avg_outcome_difference_metric(),
        _mean_outcome_metric("Mean_outcome_treated", 1),
        _mean_outcome_metric("Mean_outcome_control", 0),
        value_metric("Total_Cognitive_Score", gamma=0, bounds=None),
        _cost_effectiveness_metric(cost),
    ]


def case_metrics(scenario: str | ScenarioSpec) -> list[Metric]:
    """Metric set for a recognized scenario."""
    if isinstance(scenario, ScenarioSpec):
        name = scenario.name
        cost = float(scenario.params.get("cost", 0.1))
    else:
        name, cost = scenario, 0.1
    if name == "lending":
        return lending_metrics()
    if name == "healthcare":
        return healthcare_metrics(cost)
    raise ValidationError(f"unknown scenario {name!r}")
