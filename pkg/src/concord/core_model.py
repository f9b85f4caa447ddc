"""Domain types for stakeholders, actions, outcomes, datasets, and reward matrices.

Everything here is immutable after construction; operations are pure
functions, so evaluation across contexts can be parallelized freely.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, ParameterError, ValidationError

# Row sums within this tolerance are accepted as stochastic outright.
STOCHASTIC_ATOL = 1e-9
# Row sums deviating by less than this are silently renormalized; larger
# deviations are treated as bugs upstream and rejected.
STOCHASTIC_RENORM_ATOL = 1e-6

_FLOAT_FMT = "%.12g"


@dataclass(frozen=True)
class StakeholderSet:
    """Ordered set of actor identifiers; row order of every reward matrix."""

    actors: tuple[str, ...]

    def __post_init__(self):
        if not self.actors:
            raise ValidationError("stakeholder set must not be empty")
        if len(set(self.actors)) != len(self.actors):
            raise ValidationError("actor identifiers must be unique")

    @property
    def n(self) -> int:
        return len(self.actors)

    def index(self, actor: str) -> int:
        try:
            return self.actors.index(actor)
        except ValueError:
            raise ValidationError(f"unknown actor {actor!r}") from None


@dataclass(frozen=True)
class ActionSpace:
    """Ordered, finite set of action identifiers."""

    actions: tuple[str, ...]

    def __post_init__(self):
        if not self.actions:
            raise ValidationError("action space must not be empty")
        if len(set(self.actions)) != len(self.actions):
            raise ValidationError("action identifiers must be unique")

    @property
    def k(self) -> int:
        return len(self.actions)

    def index(self, action: str) -> int:
        try:
            return self.actions.index(action)
        except ValueError:
            raise ValidationError(f"unknown action {action!r}") from None


@dataclass(frozen=True)
class OutcomeSpace:
    """Discrete outcome labels, or a binned continuous range.

    Continuous outcomes are integrated by the midpoint rule over the bins
    defined by ``bin_edges``; slot ``o`` of any |A| x |O| matrix then refers
    to the o-th bin rather than a label.
    """

    kind: str  # "discrete" | "continuous"
    labels: tuple[str, ...] = ()
    bin_edges: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "discrete":
            if not self.labels:
                raise ValidationError("discrete outcome space needs labels")
            if len(set(self.labels)) != len(self.labels):
                raise ValidationError("outcome labels must be unique")
        elif self.kind == "continuous":
            edges = np.asarray(self.bin_edges, dtype=float)
            if edges.size < 2:
                raise ValidationError("continuous outcome space needs >= 2 bin edges")
            if not np.all(np.diff(edges) > 0):
                raise ValidationError("bin edges must be strictly increasing")
        else:
            raise ValidationError(f"unknown outcome kind {self.kind!r}")

    @classmethod
    def discrete(cls, labels: Sequence[str]) -> "OutcomeSpace":
        return cls(kind="discrete", labels=tuple(labels))

    @classmethod
    def continuous(cls, bin_edges: Sequence[float]) -> "OutcomeSpace":
        return cls(kind="continuous", bin_edges=tuple(float(e) for e in bin_edges))

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    @property
    def m(self) -> int:
        """Number of outcome slots (labels, or bins for continuous)."""
        if self.is_discrete:
            return len(self.labels)
        return len(self.bin_edges) - 1

    @property
    def lo(self) -> float:
        return self.bin_edges[0]

    @property
    def hi(self) -> float:
        return self.bin_edges[-1]

    def midpoints(self) -> np.ndarray:
        edges = np.asarray(self.bin_edges, dtype=float)
        return 0.5 * (edges[:-1] + edges[1:])

    def bin_of(self, value: float) -> int:
        """Bin index of a continuous outcome value; edge values go right."""
        if self.is_discrete:
            raise ValidationError("bin_of is only defined for continuous outcomes")
        idx = int(np.searchsorted(self.bin_edges, value, side="right")) - 1
        return min(max(idx, 0), self.m - 1)


@dataclass(frozen=True)
class Context:
    """Feature vector for one decision instance, plus optional group code."""

    features: np.ndarray
    group: int | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 1:
            raise DimensionError("context features must be a 1-d vector")
        if not np.all(np.isfinite(feats)):
            raise ValidationError("context features must be finite")
        object.__setattr__(self, "features", feats)


@dataclass(frozen=True)
class DatasetSchema:
    """Column layout of a CSV dataset.

    Reward columns, when present, are named ``reward_<actor>`` and must
    cover exactly the declared stakeholder set.
    """

    feature_names: tuple[str, ...]
    actions: ActionSpace
    outcomes: OutcomeSpace
    actors: StakeholderSet | None = None
    group_column: str | None = None


@dataclass(frozen=True)
class Dataset:
    """Observed (context, action, outcome) triplets with a fixed schema."""

    schema: DatasetSchema
    features: np.ndarray  # (n, d) float
    actions: np.ndarray  # (n,) int, indices into schema.actions
    outcomes: np.ndarray  # (n,) int for discrete, float for continuous
    groups: np.ndarray | None = None  # (n,) int when schema has a group column

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        acts = np.asarray(self.actions)
        outs = np.asarray(self.outcomes)
        if feats.ndim != 2 or feats.shape[1] != len(self.schema.feature_names):
            raise DimensionError("feature matrix does not match schema")
        n = feats.shape[0]
        if acts.shape != (n,) or outs.shape != (n,):
            raise DimensionError("actions/outcomes must align with features")
        if not np.all(np.isfinite(feats)):
            raise ValidationError("features contain non-finite values")
        if acts.size and (acts.min() < 0 or acts.max() >= self.schema.actions.k):
            raise ValidationError("action index out of range")
        if self.schema.outcomes.is_discrete:
            outs = outs.astype(int)
            if outs.size and (outs.min() < 0 or outs.max() >= self.schema.outcomes.m):
                raise ValidationError("discrete outcome out of range")
        else:
            outs = outs.astype(float)
            if outs.size and (
                outs.min() < self.schema.outcomes.lo - 1e-12
                or outs.max() > self.schema.outcomes.hi + 1e-12
            ):
                raise ValidationError("continuous outcome outside declared range")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "actions", acts.astype(int))
        object.__setattr__(self, "outcomes", outs)
        if self.groups is not None:
            grp = np.asarray(self.groups).astype(int)
            if grp.shape != (n,):
                raise DimensionError("group column must align with features")
            object.__setattr__(self, "groups", grp)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def context(self, i: int) -> Context:
        group = int(self.groups[i]) if self.groups is not None else None
        return Context(features=self.features[i], group=group)

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(
            schema=self.schema,
            features=self.features[idx],
            actions=self.actions[idx],
            outcomes=self.outcomes[idx],
            groups=None if self.groups is None else self.groups[idx],
        )


@dataclass(frozen=True)
class AugmentedDataset:
    """Dataset plus per-row stakeholder reward vectors in [0, 1]."""

    base: Dataset
    rewards: np.ndarray  # (n, |I|)

    def __post_init__(self):
        if self.base.schema.actors is None:
            raise ValidationError("augmented dataset requires a stakeholder set")
        rew = np.asarray(self.rewards, dtype=float)
        if rew.shape != (self.base.n, self.base.schema.actors.n):
            raise DimensionError("reward matrix must be (n_rows, n_actors)")
        if rew.size and (rew.min() < 0.0 or rew.max() > 1.0):
            raise ValidationError("rewards must lie in [0, 1]")
        object.__setattr__(self, "rewards", rew)

    @property
    def actors(self) -> StakeholderSet:
        return self.base.schema.actors  # type: ignore[return-value]

    @property
    def n(self) -> int:
        return self.base.n

    def subset(self, idx: np.ndarray) -> "AugmentedDataset":
        return AugmentedDataset(base=self.base.subset(idx), rewards=self.rewards[idx])


@dataclass(frozen=True)
class PredictedRewardMatrix:
    """One actor's predicted desirability for every (action, outcome) pair."""

    actor: str
    values: np.ndarray  # (|A|, |O|) in [0, 1]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise DimensionError("predicted reward matrix must be 2-d")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("predicted rewards must be finite")
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValidationError("predicted rewards must lie in [0, 1]")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class ExpectedRewardMatrix:
    """Outcome-marginalized stakeholder utilities: one row per actor."""

    values: np.ndarray  # (|I|, |A|) in [0, 1]
    context: Context | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise DimensionError("expected reward matrix must be 2-d")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("expected rewards must be finite")
        if vals.size and (vals.min() < -1e-12 or vals.max() > 1.0 + 1e-12):
            raise ValidationError("expected rewards must lie in [0, 1]")
        object.__setattr__(self, "values", np.clip(vals, 0.0, 1.0))


@dataclass(frozen=True)
class RewardTensor:
    """Stack of expected-reward matrices over a context batch: (|X|, |I|, |A|)."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 3:
            raise DimensionError("reward tensor must be (contexts, actors, actions)")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("reward tensor must be finite")
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValidationError("reward tensor entries must lie in [0, 1]")
        object.__setattr__(self, "values", vals)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape  # type: ignore[return-value]

    @classmethod
    def from_matrices(cls, matrices: Sequence[ExpectedRewardMatrix]) -> "RewardTensor":
        return cls(values=np.stack([m.values for m in matrices], axis=0))


def _validate_stochastic_rows(dist: np.ndarray) -> np.ndarray:
    """Return a row-stochastic copy, renormalizing tiny float drift only."""
    if not np.all(np.isfinite(dist)):
        raise ValidationError("outcome distribution contains non-finite values")
    if dist.size and dist.min() < -STOCHASTIC_ATOL:
        raise ValidationError("outcome distribution has negative entries")
    sums = dist.sum(axis=-1)
    dev = np.abs(sums - 1.0)
    if np.any(dev > STOCHASTIC_RENORM_ATOL):
        bad = int(np.argmax(dev))
        raise ValidationError(
            f"outcome distribution row {bad} sums to {sums.flat[bad]:.9f}, not 1"
        )
    out = np.clip(dist, 0.0, None)
    if np.any(dev > STOCHASTIC_ATOL):
        out = out / out.sum(axis=-1, keepdims=True)
    return out


def build_expected_reward_matrix(
    context: Context | None,
    outcome_distribution_per_action: np.ndarray,
    reward_matrices: Sequence[PredictedRewardMatrix],
    actors: StakeholderSet | None = None,
) -> ExpectedRewardMatrix:
    """Marginalize predicted rewards over the outcome distribution.

    ``outcome_distribution_per_action`` is an |A| x |O| row-stochastic
    matrix f(o | x, a).  Each entry of the result is
    E[i, a] = sum_o Q_i[a, o] * f(o | x, a); for continuous outcomes the
    columns are bin masses, so the same sum is the midpoint-rule integral.
    """
    dist = np.asarray(outcome_distribution_per_action, dtype=float)
    if dist.ndim != 2:
        raise DimensionError("outcome distribution must be |A| x |O|")
    dist = _validate_stochastic_rows(dist)
    if not reward_matrices:
        raise ValidationError("at least one reward matrix is required")
    if actors is not None:
        by_actor = {m.actor: m for m in reward_matrices}
        missing = [a for a in actors.actors if a not in by_actor]
        if missing:
            raise ValidationError(f"reward matrices missing for actors {missing}")
        reward_matrices = [by_actor[a] for a in actors.actors]
    rows = []
    for m in reward_matrices:
        if m.values.shape != dist.shape:
            raise DimensionError(
                f"reward matrix for {m.actor!r} has shape {m.values.shape}, "
                f"expected {dist.shape}"
            )
        rows.append((m.values * dist).sum(axis=1))
    return ExpectedRewardMatrix(values=np.stack(rows, axis=0), context=context)


def build_expected_reward_tensor(
    outcome_probs: np.ndarray, reward_stack: np.ndarray
) -> RewardTensor:
    """Batched form of build_expected_reward_matrix.

    outcome_probs: (n, |A|, |O|) row-stochastic per (context, action);
    reward_stack:  (n, |I|, |A|, |O|) predicted rewards per actor.
    """
    P = np.asarray(outcome_probs, dtype=float)
    Q = np.asarray(reward_stack, dtype=float)
    if P.ndim != 3 or Q.ndim != 4 or Q.shape[0] != P.shape[0] or Q.shape[2:] != P.shape[1:]:
        raise DimensionError("outcome_probs and reward_stack shapes do not align")
    flat = _validate_stochastic_rows(P.reshape(-1, P.shape[-1])).reshape(P.shape)
    values = np.einsum("niao,nao->nia", np.clip(Q, 0.0, 1.0), flat)
    return RewardTensor(values=np.clip(values, 0.0, 1.0))


def clip_to_tube(tensor: RewardTensor, mu: float) -> RewardTensor:
    """Clamp every entry into the interior tube [mu, 1 - mu]. Idempotent."""
    if not (0.0 < mu < 0.5):
        raise ParameterError(f"tube margin mu must lie in (0, 0.5), got {mu}")
    return RewardTensor(values=np.clip(tensor.values, mu, 1.0 - mu))


def _reward_columns(schema: DatasetSchema) -> list[str]:
    if schema.actors is None:
        return []
    return [f"reward_{a}" for a in schema.actors.actors]


def ingest_csv(path: str | Path, schema: DatasetSchema) -> Dataset | AugmentedDataset:
    """Read and validate a dataset CSV.

    Returns an AugmentedDataset when every ``reward_<actor>`` column is
    present, a plain Dataset otherwise.  Bad cells are collected and
    reported together with their row number and column name.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = list(schema.feature_names) + ["action", "outcome"]
        if schema.group_column:
            required.append(schema.group_column)
        missing = [c for c in required if c not in header]
        if missing:
            raise ValidationError(f"missing columns {missing} in {path.name}")
        reward_cols = _reward_columns(schema)
        have_rewards = bool(reward_cols) and all(c in header for c in reward_cols)
        some_rewards = any(c in header for c in reward_cols)
        if some_rewards and not have_rewards:
            present = [c for c in reward_cols if c in header]
            raise ValidationError(
                f"partial reward columns {present}; need all of {reward_cols}"
            )

        feats, acts, outs, grps, rews = [], [], [], [], []
        problems: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            try:
                feats.append([float(row[c]) for c in schema.feature_names])
            except (TypeError, ValueError):
                bad = next(
                    c
                    for c in schema.feature_names
                    if not _parses_as_float(row.get(c))
                )
                problems.append(f"row {lineno}, column {bad!r}: not a number")
                continue
            try:
                a = int(float(row["action"]))
            except (TypeError, ValueError):
                problems.append(f"row {lineno}, column 'action': not an integer")
                continue
            if not (0 <= a < schema.actions.k):
                problems.append(f"row {lineno}, column 'action': index {a} out of range")
                continue
            try:
                o = float(row["outcome"])
            except (TypeError, ValueError):
                problems.append(f"row {lineno}, column 'outcome': not a number")
                continue
            if schema.outcomes.is_discrete:
                if o != int(o) or not (0 <= int(o) < schema.outcomes.m):
                    problems.append(
                        f"row {lineno}, column 'outcome': {row['outcome']} out of range"
                    )
                    continue
                o = int(o)
            elif not (schema.outcomes.lo - 1e-12 <= o <= schema.outcomes.hi + 1e-12):
                problems.append(
                    f"row {lineno}, column 'outcome': {o} outside declared range"
                )
                continue
            if schema.group_column:
                try:
                    grps.append(int(float(row[schema.group_column])))
                except (TypeError, ValueError):
                    problems.append(
                        f"row {lineno}, column {schema.group_column!r}: not an integer"
                    )
                    continue
            if have_rewards:
                rvec = []
                ok = True
                for c in reward_cols:
                    try:
                        r = float(row[c])
                    except (TypeError, ValueError):
                        problems.append(f"row {lineno}, column {c!r}: not a number")
                        ok = False
                        break
                    if not (0.0 <= r <= 1.0):
                        problems.append(
                            f"row {lineno}, column {c!r}: reward {r} outside [0, 1]"
                        )
                        ok = False
                        break
                    rvec.append(r)
                if not ok:
                    continue
                rews.append(rvec)
            acts.append(a)
            outs.append(o)

    if problems:
        raise ValidationError(
            f"{path.name}: {len(problems)} bad cell(s):\n  " + "\n  ".join(problems)
        )
    dataset = Dataset(
        schema=schema,
        features=np.asarray(feats, dtype=float).reshape(len(acts), -1),
        actions=np.asarray(acts, dtype=int),
        outcomes=np.asarray(outs),
        groups=np.asarray(grps, dtype=int) if schema.group_column else None,
    )
    if have_rewards:
        return AugmentedDataset(base=dataset, rewards=np.asarray(rews, dtype=float))
    return dataset


def _parses_as_float(cell) -> bool:
    try:
        float(cell)
        return True
    except (TypeError, ValueError):
        return False


def write_csv(data: Dataset | AugmentedDataset, path: str | Path) -> None:
    """Serialize a dataset to the CSV layout understood by ingest_csv.

    Numeric cells are written with 12 significant digits so that
    ingest -> write -> ingest round-trips the data model.
    """
    base = data.base if isinstance(data, AugmentedDataset) else data
    schema = base.schema
    cols = list(schema.feature_names) + ["action", "outcome"]
    if schema.group_column:
        cols.append(schema.group_column)
    reward_cols = _reward_columns(schema) if isinstance(data, AugmentedDataset) else []
    cols += reward_cols

    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for i in range(base.n):
            row = [_FLOAT_FMT % v for v in base.features[i]]
            row.append(str(int(base.actions[i])))
            if schema.outcomes.is_discrete:
                row.append(str(int(base.outcomes[i])))
            else:
                row.append(_FLOAT_FMT % base.outcomes[i])
            if schema.group_column:
                row.append(str(int(base.groups[i])))  # type: ignore[index]
            if reward_cols:
                row += [_FLOAT_FMT % v for v in data.rewards[i]]  # type: ignore[union-attr]
            writer.writerow(row)
