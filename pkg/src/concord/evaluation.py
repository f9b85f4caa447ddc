"""Metric computation, composite scoring, and cross-validated strategy selection.

A metric turns a batch of per-context action distributions plus ground
truth into one raw number.  Raw scores are min-max normalized over the
candidate strategy set, flipped so 1 is always best, then combined into
a composite score by a weight vector on the metric simplex.  Strategy
selection averages per-fold composites and breaks ties by strategy-set
order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core_model import (
    AugmentedDataset,
    Dataset,
    RewardTensor,
    build_expected_reward_tensor,
)
from .errors import ConfigurationError, ParameterError, ValidationError
from .learners import (
    DEFAULT_OUTCOME_CONFIG,
    DEFAULT_REWARD_GRID,
    LearnerConfig,
    ModelReport,
    OutcomePredictor,
    RewardModel,
    fit_outcome_model,
    fit_reward_model,
)
from .seeding import substream
from .strategies import ActionDistribution, Strategy, StrategySet, decide

BUNDLE_SCHEMA = "concord.bundle/1"

DEGENERATE_SPREAD = 1e-12
WEIGHT_ATOL = 1e-9


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class MetricInputs:
    """Ground truth a metric can consume for one context batch."""

    truths: np.ndarray  # realized outcomes (or any per-row truth)
    groups: np.ndarray | None = None
    per_action_values: np.ndarray | None = None  # (n, |A|) ground-truth value of each action


@dataclass(frozen=True)
class Metric:
    """Named evaluation criterion.

    Exactly one of ``kernel`` / ``batch`` drives the computation.  A kernel
    maps (action index, inputs) to a per-row score vector; stochastic
    decisions contribute its expected value.  ``gamma`` selects averaging
    (1) or summing (0) over rows.  ``bounds`` are the metric's fixed value
    range, used when a score must be mapped to [0, 1] independently of a
    strategy set (certificates); plain selection uses min-max normalization
    over strategies instead.
    """

    name: str
    orientation: str  # "higher" | "lower"
    gamma: int = 1
    kernel: Callable[[int, MetricInputs], np.ndarray] | None = None
    batch: Callable[[np.ndarray, MetricInputs], np.ndarray] | None = None
    bounds: tuple[float, float] | None = (0.0, 1.0)
    report_only: bool = False
    requires_group: bool = False

    def __post_init__(self):
        if self.orientation not in ("higher", "lower"):
            raise ParameterError(f"orientation must be higher|lower, got {self.orientation!r}")
        if self.gamma not in (0, 1):
            raise ParameterError("gamma must be 0 (sum) or 1 (mean)")
        if (self.kernel is None) == (self.batch is None):
            raise ParameterError("exactly one of kernel/batch must be set")

    def prepare(self, inputs: MetricInputs) -> "PreparedMetric":
        if self.requires_group and inputs.groups is None:
            raise ConfigurationError(
                f"metric {self.name!r} needs a group attribute, none provided"
            )
        return PreparedMetric(self, inputs)

    def to_unit(self, raw: float) -> float:
        """Map a raw value into [0, 1] via fixed bounds and orientation."""
        if self.bounds is None:
            raise ConfigurationError(
                f"metric {self.name!r} has no fixed bounds; cannot map to [0, 1]"
            )
        lo, hi = self.bounds
        u = (raw - lo) / (hi - lo)
        u = min(max(u, 0.0), 1.0)
        return 1.0 - u if self.orientation == "lower" else u

    def definition(self) -> dict:
        return {
            "name": self.name,
            "orientation": self.orientation,
            "gamma": self.gamma,
            "bounds": list(self.bounds) if self.bounds else None,
            "report_only": self.report_only,
            "requires_group": self.requires_group,
        }


class PreparedMetric:
    """A metric bound to one context batch; cheap to evaluate repeatedly.

    ``evaluate`` accepts probs of shape (n, |A|) or any leading batch of
    them (..., n, |A|) and returns a float or an array of leading shape,
    so perturbation sweeps can score thousands of decision batches in one
    vectorized call.
    """

    def __init__(self, metric: Metric, inputs: MetricInputs):
        self.metric = metric
        self.inputs = inputs
        self._K: np.ndarray | None = None

    def _kernel_matrix(self, n_actions: int) -> np.ndarray:
        if self._K is None:
            cols = [self.metric.kernel(a, self.inputs) for a in range(n_actions)]  # type: ignore[misc]
            self._K = np.stack([np.asarray(c, dtype=float) for c in cols], axis=1)
        return self._K

    def evaluate_batch(self, probs: np.ndarray) -> np.ndarray:
        probs = np.asarray(probs, dtype=float)
        if self.metric.batch is not None:
            value = np.asarray(self.metric.batch(probs, self.inputs), dtype=float)
        else:
            K = self._kernel_matrix(probs.shape[-1])
            rows = np.einsum("...na,na->...n", probs, K)
            value = rows.mean(axis=-1) if self.metric.gamma == 1 else rows.sum(axis=-1)
        if not np.all(np.isfinite(value)):
            raise ValidationError(f"metric {self.metric.name!r} produced a non-finite value")
        return value

    def evaluate(self, probs: np.ndarray) -> float:
        return float(self.evaluate_batch(probs))


def compute_raw_metric(
    metric: Metric,
    decisions: Sequence[ActionDistribution] | np.ndarray,
    truths: np.ndarray,
    groups: np.ndarray | None = None,
    per_action_values: np.ndarray | None = None,
) -> float:
    """One raw score for a batch of decisions against ground truth."""
    probs = decisions_to_probs(decisions)
    inputs = MetricInputs(
        truths=np.asarray(truths), groups=groups, per_action_values=per_action_values
    )
    return metric.prepare(inputs).evaluate(probs)


def decisions_to_probs(decisions: Sequence[ActionDistribution] | np.ndarray) -> np.ndarray:
    if isinstance(decisions, np.ndarray):
        return decisions
    return np.stack([d.probs for d in decisions])


def action_entropy(probs: np.ndarray) -> float:
    """Shannon entropy (nats) of the marginal recommended-action frequencies."""
    marginal = np.asarray(probs, dtype=float).mean(axis=0)
    nz = marginal[marginal > 0]
    return float(-(nz * np.log(nz)).sum())


# standard metric constructors


def accuracy_metric(oracle_map: Mapping[int, int], name: str = "Accuracy") -> Metric:
    """Agreement with the designated optimal action for the realized outcome."""
    mapping = dict(oracle_map)

    def kernel(a: int, inputs: MetricInputs) -> np.ndarray:
        optimal = np.asarray([mapping[int(t)] for t in inputs.truths])
        return (optimal == a).astype(float)

    return Metric(name=name, orientation="higher", gamma=1, kernel=kernel)


def precision_macro_metric(
    oracle_map: Mapping[int, int], n_actions: int, name: str = "Precision"
) -> Metric:
    """Macro precision of recommended actions against oracle actions.

    Uses expected counts so stochastic decisions are handled; classes the
    strategy never recommends are skipped.
    """
    mapping = dict(oracle_map)

    def batch(probs: np.ndarray, inputs: MetricInputs) -> np.ndarray:
        optimal = np.asarray([mapping[int(t)] for t in inputs.truths])
        ratios = np.full(probs.shape[:-2] + (n_actions,), np.nan)
        for c in range(n_actions):
            predicted = probs[..., c].sum(axis=-1)
            true_pos = probs[..., optimal == c, c].sum(axis=-1)
            ratios[..., c] = np.where(predicted > 1e-12, true_pos / np.maximum(predicted, 1e-12), np.nan)
        with np.errstate(invalid="ignore"):
            out = np.nanmean(ratios, axis=-1)
        return np.nan_to_num(out, nan=0.0)

    return Metric(name=name, orientation="higher", batch=batch)


def demographic_parity_metric(
    positive_actions: Sequence[int], name: str = "Demographic_Parity"
) -> Metric:
    """Max pairwise absolute gap in positive-action rate across groups."""
    positive = list(positive_actions)

    def batch(probs: np.ndarray, inputs: MetricInputs) -> np.ndarray:
        groups = np.asarray(inputs.groups)
        pos = probs[..., positive].sum(axis=-1)
        rates = np.stack(
            [pos[..., groups == g].mean(axis=-1) for g in np.unique(groups)], axis=-1
        )
        if rates.shape[-1] < 2:
            return np.zeros(rates.shape[:-1])
        return rates.max(axis=-1) - rates.min(axis=-1)

    return Metric(
        name=name, orientation="lower", batch=batch, requires_group=True
    )


def value_metric(
    name: str,
    orientation: str = "higher",
    gamma: int = 1,
    bounds: tuple[float, float] | None = (0.0, 1.0),
    report_only: bool = False,
) -> Metric:
    """Expected ground-truth value of the recommended action.

    Reads the (n, |A|) per-action value table supplied in MetricInputs,
    e.g. potential outcomes in a treatment scenario.
    """

    def kernel(a: int, inputs: MetricInputs) -> np.ndarray:
        if inputs.per_action_values is None:
            raise ConfigurationError(f"metric {name!r} needs per-action ground-truth values")
        return np.asarray(inputs.per_action_values, dtype=float)[:, a]

    return Metric(
        name=name,
        orientation=orientation,
        gamma=gamma,
        kernel=kernel,
        bounds=bounds,
        report_only=report_only,
    )


# ---------------------------------------------------------------------------
# normalization and composite scores


def normalize_scores(raw: np.ndarray, orientation: str) -> np.ndarray:
    """Min-max normalize raw scores over the strategy axis.

    Lower-is-better metrics are flipped so 1 is always best.  When the
    spread is below 1e-12 every strategy attains the optimum and all
    receive 1.0.
    """
    raw = np.asarray(raw, dtype=float)
    lo, hi = raw.min(), raw.max()
    if hi - lo < DEGENERATE_SPREAD:
        return np.ones_like(raw)
    norm = (raw - lo) / (hi - lo)
    return 1.0 - norm if orientation == "lower" else norm


def composite_score(normalized: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted sum over metrics: normalized is (n_metrics, n_strategies)."""
    normalized = np.asarray(normalized, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or normalized.shape[0] != weights.size:
        raise ParameterError("weights must align with the metric axis")
    if abs(weights.sum() - 1.0) > WEIGHT_ATOL:
        raise ParameterError(f"metric weights sum to {weights.sum()}, not 1")
    if weights.min() < 0:
        raise ParameterError("metric weights must be non-negative")
    return weights @ normalized


def resolve_weights(metrics: Sequence[Metric], weights: Mapping[str, float] | None) -> np.ndarray:
    """Weight vector aligned with the metric list.

    Defaults to uniform over non-report-only metrics (report-only metrics
    get zero weight and are shown for information only).
    """
    if weights is None:
        active = np.asarray([0.0 if m.report_only else 1.0 for m in metrics])
        if active.sum() == 0:
            raise ConfigurationError("all metrics are report-only; nothing to optimize")
        return active / active.sum()
    missing = [m.name for m in metrics if m.name not in weights]
    if missing:
        raise ConfigurationError(f"weights missing for metrics {missing}")
    vec = np.asarray([float(weights[m.name]) for m in metrics])
    if abs(vec.sum() - 1.0) > WEIGHT_ATOL:
        raise ParameterError(f"metric weights sum to {vec.sum()}, not 1")
    return vec


# ---------------------------------------------------------------------------
# cross-validated strategy selection


@dataclass
class FoldRecord:
    """Everything computed on one validation fold."""

    fold: int
    val_indices: np.ndarray
    raw: dict[str, dict[str, float]]  # strategy -> metric -> raw
    normalized: dict[str, dict[str, float]]
    composite: dict[str, float]
    decisions: dict[str, np.ndarray]  # strategy -> (n_val, |A|)
    tensor: np.ndarray  # (n_val, |I|, |A|)
    truths: np.ndarray
    groups: np.ndarray | None
    per_action_truths: np.ndarray | None
    outcome_report: ModelReport
    reward_reports: dict[str, ModelReport]


@dataclass
class SelectionResult:
    """Winner of Algorithm-style strategy selection plus full fold detail."""

    selected: str
    mean_composite: dict[str, float]
    folds: list[FoldRecord]
    fold_of_row: np.ndarray
    seed: int
    k_folds: int
    strategy_names: list[str]
    metric_names: list[str]
    weights: dict[str, float]


def assign_folds(
    outcomes: np.ndarray, k: int, seed: int, stratify: bool
) -> np.ndarray:
    """Deterministic fold index per row; stratified on the outcome label."""
    if k < 2:
        raise ParameterError("cross-validation needs k >= 2 folds")
    n = outcomes.shape[0]
    rng = substream(seed, "folds")
    fold_of_row = np.empty(n, dtype=int)
    if stratify:
        labels = outcomes.astype(int)
        for cls in np.unique(labels):
            idx = np.nonzero(labels == cls)[0]
            if idx.size < k:
                raise ConfigurationError(
                    f"outcome class {cls} has {idx.size} rows; cannot stratify into {k} folds"
                )
            perm = rng.permutation(idx)
            fold_of_row[perm] = np.arange(perm.size) % k
    else:
        perm = rng.permutation(n)
        fold_of_row[perm] = np.arange(n) % k
    return fold_of_row


def _fold_seed(seed: int, fold: int) -> int:
    return int(substream(seed, f"fold:{fold}").integers(0, 2**31 - 1))


def run_strategies_on_tensor(
    strategy_set: StrategySet,
    tensor: np.ndarray,
    outcome_probs: np.ndarray,
    truths: np.ndarray,
    per_action_truths: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Per-strategy decision distributions for a batch of contexts."""
    n = tensor.shape[0]
    k = tensor.shape[2]
    out: dict[str, np.ndarray] = {}
    for strategy in strategy_set:
        probs = np.empty((n, k))
        for t in range(n):
            true_outcome = (
                per_action_truths[t]
                if (strategy.kind == "oracle" and strategy.outcome_action_map is None)
                else truths[t]
            )
            probs[t] = decide(
                strategy, tensor[t], outcome_probs=outcome_probs[t], true_outcome=true_outcome
            ).probs
        out[strategy.name] = probs
    return out


def score_strategies(
    decisions: Mapping[str, np.ndarray],
    metrics: Sequence[Metric],
    inputs: MetricInputs,
    weights: np.ndarray,
    strategy_names: Sequence[str],
) -> tuple[dict, dict, dict]:
    """Raw, normalized, and composite scores for one fold."""
    prepared = [m.prepare(inputs) for m in metrics]
    raw_grid = np.asarray(
        [[p.evaluate(decisions[name]) for name in strategy_names] for p in prepared]
    )
    norm_grid = np.stack(
        [normalize_scores(raw_grid[h], metrics[h].orientation) for h in range(len(metrics))]
    )
    composites = composite_score(norm_grid, weights)
    raw = {
        name: {m.name: float(raw_grid[h, s]) for h, m in enumerate(metrics)}
        for s, name in enumerate(strategy_names)
    }
    norm = {
        name: {m.name: float(norm_grid[h, s]) for h, m in enumerate(metrics)}
        for s, name in enumerate(strategy_names)
    }
    comp = {name: float(composites[s]) for s, name in enumerate(strategy_names)}
    return raw, norm, comp


def run_fold(
    dataset: Dataset,
    augmented: AugmentedDataset,
    strategy_set: StrategySet,
    metrics: Sequence[Metric],
    weight_vec: np.ndarray,
    train_idx: np.ndarray,
    val_idx: np.ndarray,
    fold_seed: int,
    outcome_config: LearnerConfig,
    reward_grid: Sequence[LearnerConfig],
    per_action_truths: np.ndarray | None = None,
    fold_index: int = 0,
    keep_models: bool = False,
):
    """Fit on the training split, evaluate every strategy on the validation split."""
    actors = augmented.actors
    train_aug = augmented.subset(train_idx)
    outcome_model, outcome_report = fit_outcome_model(
        dataset.subset(train_idx), outcome_config, seed=fold_seed
    )
    reward_models: dict[str, RewardModel] = {}
    reward_reports: dict[str, ModelReport] = {}
    for actor in actors.actors:
        model, report = fit_reward_model(train_aug, actor, reward_grid, seed=fold_seed)
        reward_models[actor] = model
        reward_reports[actor] = report

    val_X = dataset.features[val_idx]
    outcome_probs = outcome_model.predict_proba_all_actions(val_X)
    reward_stack = np.stack(
        [reward_models[a].predict_matrix_batch(val_X) for a in actors.actors], axis=1
    )
    tensor = build_expected_reward_tensor(outcome_probs, reward_stack).values

    truths = dataset.outcomes[val_idx]
    groups = dataset.groups[val_idx] if dataset.groups is not None else None
    pav = per_action_truths[val_idx] if per_action_truths is not None else None
    decisions = run_strategies_on_tensor(
        strategy_set, tensor, outcome_probs, truths, per_action_truths=pav
    )
    inputs = MetricInputs(truths=truths, groups=groups, per_action_values=pav)
    raw, norm, comp = score_strategies(
        decisions, metrics, inputs, weight_vec, strategy_set.names
    )
    record = FoldRecord(
        fold=fold_index,
        val_indices=val_idx,
        raw=raw,
        normalized=norm,
        composite=comp,
        decisions=decisions,
        tensor=tensor,
        truths=truths,
        groups=groups,
        per_action_truths=pav,
        outcome_report=outcome_report,
        reward_reports=reward_reports,
    )
    if keep_models:
        return record, outcome_model, reward_models
    return record


def evaluate_holdout(
    dataset: Dataset,
    augmented: AugmentedDataset,
    strategy_set: StrategySet,
    metrics: Sequence[Metric],
    weights: Mapping[str, float] | None = None,
    val_fraction: float = 0.2,
    seed: int = 0,
    outcome_config: LearnerConfig = DEFAULT_OUTCOME_CONFIG,
    reward_grid: Sequence[LearnerConfig] = DEFAULT_REWARD_GRID,
    per_action_truths: np.ndarray | None = None,
) -> FoldRecord:
    """Single train/validation split through the same per-fold pipeline."""
    weight_vec = resolve_weights(metrics, weights)
    rng = substream(seed, "holdout-split")
    perm = rng.permutation(dataset.n)
    n_val = max(1, int(round(dataset.n * val_fraction)))
    return run_fold(
        dataset,
        augmented,
        strategy_set,
        metrics,
        weight_vec,
        train_idx=perm[n_val:],
        val_idx=perm[:n_val],
        fold_seed=_fold_seed(seed, 0),
        outcome_config=outcome_config,
        reward_grid=reward_grid,
        per_action_truths=per_action_truths,
    )


def cross_validate_select(
    dataset: Dataset,
    augmented: AugmentedDataset,
    strategy_set: StrategySet,
    metrics: Sequence[Metric],
    weights: Mapping[str, float] | None = None,
    k_folds: int = 5,
    seed: int = 0,
    outcome_config: LearnerConfig = DEFAULT_OUTCOME_CONFIG,
    reward_grid: Sequence[LearnerConfig] = DEFAULT_REWARD_GRID,
    per_action_truths: np.ndarray | None = None,
) -> SelectionResult:
    """Select the best strategy by k-fold cross-validated composite score.

    Per fold: fit the outcome predictor and every actor's reward model on
    the training split, build expected-reward matrices on the validation
    split, run every strategy, normalize metric scores within the fold,
    and combine with the metric weights.  The winner maximizes the mean
    composite across folds; ties go to the earlier strategy.
    """
    weight_vec = resolve_weights(metrics, weights)
    stratify = dataset.schema.outcomes.is_discrete
    fold_of_row = assign_folds(dataset.outcomes, k_folds, seed, stratify)

    folds: list[FoldRecord] = []
    for f in range(k_folds):
        val_idx = np.nonzero(fold_of_row == f)[0]
        train_idx = np.nonzero(fold_of_row != f)[0]
        folds.append(
            run_fold(
                dataset,
                augmented,
                strategy_set,
                metrics,
                weight_vec,
                train_idx=train_idx,
                val_idx=val_idx,
                fold_seed=_fold_seed(seed, f),
                outcome_config=outcome_config,
                reward_grid=reward_grid,
                per_action_truths=per_action_truths,
                fold_index=f,
            )
        )

    names = strategy_set.names
    means = np.asarray([float(np.mean([fr.composite[n] for fr in folds])) for n in names])
    selected = names[int(np.argmax(means))]
    return SelectionResult(
        selected=selected,
        mean_composite={n: float(m) for n, m in zip(names, means)},
        folds=folds,
        fold_of_row=fold_of_row,
        seed=seed,
        k_folds=k_folds,
        strategy_names=names,
        metric_names=[m.name for m in metrics],
        weights={m.name: float(w) for m, w in zip(metrics, weight_vec)},
    )


# ---------------------------------------------------------------------------
# cost model


@dataclass(frozen=True)
class CostModel:
    """Instantiated symbolic operation counts for the added pipeline work."""

    offline: float
    online_preselected: float
    online_all_strategies: float
    sizes: dict

    def to_json(self) -> dict:
        return {
            "offline": self.offline,
            "online_preselected": self.online_preselected,
            "online_all_strategies": self.online_all_strategies,
            "sizes": self.sizes,
        }


def estimate_overhead(
    n_actors: int,
    n_actions: int,
    n_strategies: int,
    n_metrics: int,
    grid_size: int,
    n_val: int,
    c_train: float = 1.0,
    c_inf: float = 1.0,
) -> CostModel:
    """Operation counts added on top of a plain outcome-prediction system.

    Offline (per cross-validation run):
        |I| * (|G| * c_train + T_val * |A| * (c_inf + |D|)) + T_val * |D| * |M|
    Online (per context): |A| * |I| * (c_inf + 1) with a preselected
    strategy, or |A| * |I| * (c_inf + |D|) when evaluating all strategies.
    """
    offline = n_actors * (
        grid_size * c_train + n_val * n_actions * (c_inf + n_strategies)
    ) + n_val * n_strategies * n_metrics
    online_pre = n_actions * n_actors * (c_inf + 1.0)
    online_all = n_actions * n_actors * (c_inf + n_strategies)
    return CostModel(
        offline=float(offline),
        online_preselected=float(online_pre),
        online_all_strategies=float(online_all),
        sizes={
            "n_actors": n_actors,
            "n_actions": n_actions,
            "n_strategies": n_strategies,
            "n_metrics": n_metrics,
            "grid_size": grid_size,
            "n_val": n_val,
            "c_train": c_train,
            "c_inf": c_inf,
        },
    )


# ---------------------------------------------------------------------------
# evaluation bundle (consumed by the certify command and the browser UI)


def bundle_from_selection(
    result: SelectionResult,
    strategy_set: StrategySet,
    metrics: Sequence[Metric],
    actors: Sequence[str],
    actions: Sequence[str],
    outcomes_json: dict,
    scenario: str | None = None,
) -> dict:
    """Assemble the versioned evaluation-bundle document."""
    folds = []
    for fr in result.folds:
        folds.append(
            {
                "fold": fr.fold,
                "val_indices": fr.val_indices.tolist(),
                "raw": fr.raw,
                "normalized": fr.normalized,
                "composite": fr.composite,
                "decisions": {k: v.tolist() for k, v in fr.decisions.items()},
                "tensor": fr.tensor.tolist(),
                "truths": np.asarray(fr.truths).tolist(),
                "groups": None if fr.groups is None else fr.groups.tolist(),
                "per_action_truths": (
                    None
                    if fr.per_action_truths is None
                    else np.asarray(fr.per_action_truths).tolist()
                ),
                "outcome_report": fr.outcome_report.to_json(include_timings=False),
                "reward_reports": {
                    a: r.to_json(include_timings=False) for a, r in fr.reward_reports.items()
                },
            }
        )
    return {
        "schema": BUNDLE_SCHEMA,
        "seed": result.seed,
        "k_folds": result.k_folds,
        "scenario": scenario,
        "actors": list(actors),
        "actions": list(actions),
        "outcomes": outcomes_json,
        "strategies": [s.to_json() for s in strategy_set],
        "metrics": [m.definition() for m in metrics],
        "weights": result.weights,
        "folds": folds,
        "mean_composite": result.mean_composite,
        "selected": result.selected,
    }


def check_bundle_schema(bundle: dict) -> None:
    schema = bundle.get("schema")
    if schema != BUNDLE_SCHEMA:
        raise ValidationError(
            f"bundle schema {schema!r} does not match {BUNDLE_SCHEMA!r}; "
            "regenerate the bundle with this version's select command"
        )
