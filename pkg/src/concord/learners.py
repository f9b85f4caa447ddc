"""Outcome predictors and per-actor reward models.

Three pluggable learner kinds: k-nearest-neighbors (Euclidean on
standardized features, neighbor ties broken by row index), a small
random forest (CART with Gini/variance splits, bootstrap, per-split
feature subsampling), and an exact lookup table with no generalization.

Reward models consume the joint encoding
(context features | one-hot action | one-hot outcome or scalar outcome)
and clamp predictions to [0, 1].  Fitted models are immutable and can be
queried concurrently; all randomness flows from named substreams of one
seed, so predictions are bit-for-bit reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core_model import AugmentedDataset, Context, Dataset, OutcomeSpace, PredictedRewardMatrix
from .errors import ParameterError, StateError, TableLookupError, ValidationError
from .seeding import substream

MODEL_SCHEMA = "concord.model/1"

_KEY_FMT = "%.12g"


# ---------------------------------------------------------------------------
# learner configuration


@dataclass(frozen=True)
class LearnerConfig:
    """Hyperparameters for one learner kind; irrelevant fields are ignored."""

    kind: str  # "knn" | "forest" | "table"
    k: int = 5
    trees: int = 25
    max_depth: int | None = 8
    min_leaf: int = 1
    feature_subsample: int | str | None = "sqrt"
    bootstrap: bool = True
    table_key: str = "context_action"  # "context_action" | "action"

    def __post_init__(self):
        if self.kind not in ("knn", "forest", "table"):
            raise ParameterError(f"unknown learner kind {self.kind!r}")
        if self.kind == "knn" and self.k < 1:
            raise ParameterError("k must be >= 1")
        if self.kind == "forest" and (self.trees < 1 or self.min_leaf < 1):
            raise ParameterError("forest needs trees >= 1 and min_leaf >= 1")
        if self.table_key not in ("context_action", "action"):
            raise ParameterError(f"unknown table key mode {self.table_key!r}")

    def hyperparams(self) -> dict:
        if self.kind == "knn":
            return {"kind": "knn", "k": self.k}
        if self.kind == "forest":
            return {
                "kind": "forest",
                "trees": self.trees,
                "max_depth": self.max_depth,
                "min_leaf": self.min_leaf,
                "feature_subsample": self.feature_subsample,
                "bootstrap": self.bootstrap,
            }
        return {"kind": "table", "table_key": self.table_key}

    def to_json(self) -> dict:
        return self.hyperparams()

    @classmethod
    def from_json(cls, obj: dict) -> "LearnerConfig":
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in obj.items()})


DEFAULT_OUTCOME_CONFIG = LearnerConfig(kind="forest", trees=25, max_depth=8)

DEFAULT_REWARD_GRID: tuple[LearnerConfig, ...] = tuple(
    [LearnerConfig(kind="knn", k=k) for k in (1, 3, 5, 7)]
    + [
        LearnerConfig(kind="forest", trees=t, max_depth=d)
        for t in (25, 100)
        for d in (4, 8, None)
    ]
)


@dataclass(frozen=True)
class ModelReport:
    """Held-out error and bookkeeping for one fitted model."""

    error: float  # held-out MAE (reward/regression) or error rate (discrete)
    error_kind: str
    hyperparams: dict
    grid_size: int
    fit_seconds: float
    predict_seconds_per_row: float
    degenerate: bool = False

    def __post_init__(self):
        if self.error < 0:
            raise ValidationError("held-out error must be non-negative")

    def to_json(self, include_timings: bool = True) -> dict:
        out = {
            "error": self.error,
            "error_kind": self.error_kind,
            "hyperparams": self.hyperparams,
            "grid_size": self.grid_size,
            "degenerate": self.degenerate,
        }
        if include_timings:
            out["fit_seconds"] = self.fit_seconds
            out["predict_seconds_per_row"] = self.predict_seconds_per_row
        return out


# ---------------------------------------------------------------------------
# feature standardization (train-fold statistics only)


class Standardizer:
    """Column-wise standardization restricted to a mask of continuous columns."""

    def __init__(self, mean: np.ndarray, scale: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.scale = np.asarray(scale, dtype=float)

    @classmethod
    def fit(cls, X: np.ndarray, mask: np.ndarray | None = None) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale < 1e-12] = 1.0
        if mask is not None:
            mean = np.where(mask, mean, 0.0)
            scale = np.where(mask, scale, 1.0)
        return cls(mean, scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Standardizer":
        return cls(np.asarray(obj["mean"]), np.asarray(obj["scale"]))


# ---------------------------------------------------------------------------
# k-nearest neighbors


class KnnCore:
    def __init__(self, k: int):
        self.k = k
        self.X: np.ndarray | None = None
        self.y: np.ndarray | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "KnnCore":
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y)
        return self

    def _neighbors(self, Q: np.ndarray) -> np.ndarray:
        """Indices of the k nearest training rows per query, ties by row index."""
        assert self.X is not None
        d2 = (
            (Q * Q).sum(axis=1)[:, None]
            - 2.0 * Q @ self.X.T
            + (self.X * self.X).sum(axis=1)[None, :]
        )
        k = min(self.k, self.X.shape[0])
        order = np.argsort(d2, axis=1, kind="stable")
        return order[:, :k]

    def predict_labels(self, Q: np.ndarray, n_classes: int) -> np.ndarray:
        nn = self._neighbors(Q)
        labels = self.y[nn]  # type: ignore[index]
        dist = np.zeros((Q.shape[0], n_classes))
        rows = np.repeat(np.arange(Q.shape[0]), nn.shape[1])
        np.add.at(dist, (rows, labels.ravel().astype(int)), 1.0)
        return dist / nn.shape[1]

    def predict_mean(self, Q: np.ndarray) -> np.ndarray:
        nn = self._neighbors(Q)
        return self.y[nn].astype(float).mean(axis=1)  # type: ignore[index]

    def predict_bins(self, Q: np.ndarray, edges: Sequence[float]) -> np.ndarray:
        nn = self._neighbors(Q)
        return _histogram_rows(self.y[nn].astype(float), edges)  # type: ignore[index]

    def to_json(self) -> dict:
        return {"k": self.k, "X": self.X.tolist(), "y": self.y.tolist()}  # type: ignore[union-attr]

    @classmethod
    def from_json(cls, obj: dict) -> "KnnCore":
        core = cls(k=obj["k"])
        core.X = np.asarray(obj["X"], dtype=float)
        core.y = np.asarray(obj["y"])
        return core


def _histogram_rows(values: np.ndarray, edges: Sequence[float]) -> np.ndarray:
    """Row-wise histogram over bins, edge values assigned rightward."""
    edges = np.asarray(edges, dtype=float)
    nbins = edges.size - 1
    idx = np.clip(np.searchsorted(edges, values, side="right") - 1, 0, nbins - 1)
    out = np.zeros((values.shape[0], nbins))
    rows = np.repeat(np.arange(values.shape[0]), values.shape[1])
    np.add.at(out, (rows, idx.ravel()), 1.0)
    return out / values.shape[1]


# ---------------------------------------------------------------------------
# random forest (CART)


class _Tree:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=int)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=int)
        self.right = np.asarray(right, dtype=int)
        self.value = np.asarray(value, dtype=float)

    def apply(self, X: np.ndarray) -> np.ndarray:
        nodes = np.zeros(X.shape[0], dtype=int)
        while True:
            feat = self.feature[nodes]
            internal = feat >= 0
            if not internal.any():
                return nodes
            go_left = X[np.arange(X.shape[0]), np.where(internal, feat, 0)] <= self.threshold[nodes]
            nxt = np.where(go_left, self.left[nodes], self.right[nodes])
            nodes = np.where(internal, nxt, nodes)

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "_Tree":
        return cls(obj["feature"], obj["threshold"], obj["left"], obj["right"], obj["value"])


def _leaf_value(y: np.ndarray, task: str, n_classes: int) -> np.ndarray:
    if task == "classify":
        counts = np.bincount(y.astype(int), minlength=n_classes).astype(float)
        return counts / counts.sum()
    return np.asarray([float(y.mean())])


def _best_split(X, y, idx, feats, min_leaf, task, n_classes):
    """Best (feature, threshold, impurity) over candidate features, or None."""
    n = idx.size
    best_imp = np.inf
    best = None
    for f in feats:
        order = idx[np.argsort(X[idx, f], kind="stable")]
        xv = X[order, f]
        cuts = np.nonzero(xv[1:] > xv[:-1])[0] + 1
        cuts = cuts[(cuts >= min_leaf) & (cuts <= n - min_leaf)]
        if cuts.size == 0:
            continue
        n_l = cuts.astype(float)
        n_r = n - n_l
        if task == "classify":
            onehot = np.zeros((n, n_classes))
            onehot[np.arange(n), y[order].astype(int)] = 1.0
            cum = np.cumsum(onehot, axis=0)
            left = cum[cuts - 1]
            right = cum[-1] - left
            gini_l = 1.0 - ((left / n_l[:, None]) ** 2).sum(axis=1)
            gini_r = 1.0 - ((right / n_r[:, None]) ** 2).sum(axis=1)
            imp = (n_l * gini_l + n_r * gini_r) / n
        else:
            yv = y[order].astype(float)
            cy = np.cumsum(yv)
            cy2 = np.cumsum(yv * yv)
            sum_l = cy[cuts - 1]
            sum2_l = cy2[cuts - 1]
            var_l = sum2_l / n_l - (sum_l / n_l) ** 2
            sum_r = cy[-1] - sum_l
            sum2_r = cy2[-1] - sum2_l
            var_r = sum2_r / n_r - (sum_r / n_r) ** 2
            imp = (n_l * var_l + n_r * var_r) / n
        j = int(np.argmin(imp))
        if imp[j] < best_imp - 1e-15:
            cut = cuts[j]
            best_imp = imp[j]
            best = (f, 0.5 * (xv[cut - 1] + xv[cut]))
    return best


def _grow_tree(X, y, rng, *, task, n_classes, max_depth, min_leaf, max_features):
    n, d = X.shape
    feature, threshold, left, right, value = [], [], [], [], []

    def add_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(None)
        return len(feature) - 1

    root = add_node()
    stack = [(np.arange(n), 0, root)]
    while stack:
        idx, depth, slot = stack.pop()
        yv = y[idx]
        pure = np.unique(yv).size == 1
        depth_out = max_depth is not None and depth >= max_depth
        if pure or depth_out or idx.size < 2 * min_leaf:
            value[slot] = _leaf_value(yv, task, n_classes)
            continue
        feats = rng.permutation(d)[:max_features] if max_features < d else np.arange(d)
        split = _best_split(X, y, idx, feats, min_leaf, task, n_classes)
        if split is None:
            value[slot] = _leaf_value(yv, task, n_classes)
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        feature[slot] = f
        threshold[slot] = thr
        l_slot = add_node()
        r_slot = add_node()
        left[slot] = l_slot
        right[slot] = r_slot
        stack.append((idx[~mask], depth + 1, r_slot))
        stack.append((idx[mask], depth + 1, l_slot))

    width = n_classes if task == "classify" else 1
    vals = np.zeros((len(feature), width))
    for i, v in enumerate(value):
        if v is not None:
            vals[i] = v
    return _Tree(feature, threshold, left, right, vals)


class ForestCore:
    def __init__(self, config: LearnerConfig):
        self.config = config
        self.trees: list[_Tree] = []
        self.task = ""
        self.n_classes = 0

    def fit(self, X: np.ndarray, y: np.ndarray, task: str, n_classes: int, rng) -> "ForestCore":
        X = np.asarray(X, dtype=float)
        n, d = X.shape
        self.task = task
        self.n_classes = n_classes
        fs = self.config.feature_subsample
        if fs == "sqrt":
            max_features = max(1, int(np.sqrt(d)))
        elif fs is None:
            max_features = d
        else:
            max_features = min(int(fs), d)
        self.trees = []
        for _ in range(self.config.trees):
            idx = rng.integers(0, n, n) if self.config.bootstrap else np.arange(n)
            tree = _grow_tree(
                X[idx],
                np.asarray(y)[idx],
                rng,
                task=task,
                n_classes=n_classes,
                max_depth=self.config.max_depth,
                min_leaf=self.config.min_leaf,
                max_features=max_features,
            )
            self.trees.append(tree)
        return self

    def predict_labels(self, Q: np.ndarray) -> np.ndarray:
        acc = np.zeros((Q.shape[0], self.n_classes))
        for tree in self.trees:
            acc += tree.value[tree.apply(Q)]
        return acc / len(self.trees)

    def _tree_means(self, Q: np.ndarray) -> np.ndarray:
        return np.stack([tree.value[tree.apply(Q), 0] for tree in self.trees], axis=1)

    def predict_mean(self, Q: np.ndarray) -> np.ndarray:
        return self._tree_means(Q).mean(axis=1)

    def predict_bins(self, Q: np.ndarray, edges: Sequence[float]) -> np.ndarray:
        return _histogram_rows(self._tree_means(Q), edges)

    def to_json(self) -> dict:
        return {
            "task": self.task,
            "n_classes": self.n_classes,
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, obj: dict, config: LearnerConfig) -> "ForestCore":
        core = cls(config)
        core.task = obj["task"]
        core.n_classes = obj["n_classes"]
        core.trees = [_Tree.from_json(t) for t in obj["trees"]]
        return core


# ---------------------------------------------------------------------------
# lookup tables


class TableCore:
    """Exact lookup with no generalization; unknown keys raise."""

    def __init__(self):
        self.table: dict[str, list[float]] = {}

    @staticmethod
    def key(values: Sequence[float]) -> str:
        return ",".join(_KEY_FMT % v for v in values)

    def fit_distributions(self, keys: list[str], y: np.ndarray, n_classes: int) -> "TableCore":
        sums: dict[str, np.ndarray] = {}
        for key, label in zip(keys, y.astype(int)):
            vec = sums.setdefault(key, np.zeros(n_classes))
            vec[label] += 1.0
        self.table = {k: (v / v.sum()).tolist() for k, v in sums.items()}
        return self

    def fit_means(self, keys: list[str], y: np.ndarray) -> "TableCore":
        acc: dict[str, list[float]] = {}
        for key, val in zip(keys, y.astype(float)):
            acc.setdefault(key, []).append(float(val))
        self.table = {k: [float(np.mean(v))] for k, v in acc.items()}
        return self

    def fit_histograms(self, keys: list[str], y: np.ndarray, edges: Sequence[float]) -> "TableCore":
        acc: dict[str, list[float]] = {}
        for key, val in zip(keys, y.astype(float)):
            acc.setdefault(key, []).append(float(val))
        self.table = {
            k: _histogram_rows(np.asarray(v)[None, :], edges)[0].tolist()
            for k, v in acc.items()
        }
        return self

    def lookup(self, key: str) -> np.ndarray:
        if key not in self.table:
            raise TableLookupError(f"table has no entry for key {key!r}")
        return np.asarray(self.table[key], dtype=float)

    def to_json(self) -> dict:
        return {"table": self.table}

    @classmethod
    def from_json(cls, obj: dict) -> "TableCore":
        core = cls()
        core.table = {k: list(map(float, v)) for k, v in obj["table"].items()}
        return core


# ---------------------------------------------------------------------------
# outcome predictor


def _onehot(indices: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((len(indices), width))
    out[np.arange(len(indices)), np.asarray(indices, dtype=int)] = 1.0
    return out


@dataclass
class OutcomePredictor:
    """Predicts the outcome distribution (or scalar) from (context, action)."""

    config: LearnerConfig
    outcomes: OutcomeSpace
    n_actions: int
    standardizer: Standardizer | None = None
    knn: KnnCore | None = None
    forest: ForestCore | None = None
    table: TableCore | None = None
    fitted: bool = False

    @property
    def task(self) -> str:
        return "discrete" if self.outcomes.is_discrete else "continuous"

    def _encode(self, X: np.ndarray, actions: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return np.hstack([X, _onehot(actions, self.n_actions)])

    def fit(self, dataset: Dataset, seed: int = 0) -> "OutcomePredictor":
        X, a, y = dataset.features, dataset.actions, dataset.outcomes
        if self.config.kind == "knn":
            self.standardizer = Standardizer.fit(X)
        enc = self._encode(X, a)
        rng = substream(seed, "outcome-fit")
        if self.config.kind == "knn":
            self.knn = KnnCore(self.config.k).fit(enc, y)
        elif self.config.kind == "forest":
            task = "classify" if self.outcomes.is_discrete else "regress"
            self.forest = ForestCore(self.config).fit(enc, y, task, self.outcomes.m, rng)
        else:
            keys = self._table_keys(X, a)
            self.table = TableCore()
            if self.outcomes.is_discrete:
                self.table.fit_distributions(keys, y, self.outcomes.m)
            else:
                self.table.fit_histograms(keys, y, self.outcomes.bin_edges)
        self.fitted = True
        return self

    def _table_keys(self, X: np.ndarray, actions: np.ndarray) -> list[str]:
        if self.config.table_key == "action":
            return [str(int(a)) for a in actions]
        return [TableCore.key(row) + "|" + str(int(a)) for row, a in zip(X, actions)]

    def predict_proba(self, X: np.ndarray, action: int) -> np.ndarray:
        """(n, |O|) outcome distribution for one action across contexts."""
        if not self.fitted:
            raise StateError("outcome predictor is not fitted")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        actions = np.full(X.shape[0], action, dtype=int)
        if self.config.kind == "table":
            keys = self._table_keys(X, actions)
            return np.stack([self.table.lookup(k) for k in keys])  # type: ignore[union-attr]
        enc = self._encode(X, actions)
        if self.config.kind == "knn":
            if self.outcomes.is_discrete:
                return self.knn.predict_labels(enc, self.outcomes.m)  # type: ignore[union-attr]
            return self.knn.predict_bins(enc, self.outcomes.bin_edges)  # type: ignore[union-attr]
        if self.outcomes.is_discrete:
            return self.forest.predict_labels(enc)  # type: ignore[union-attr]
        return self.forest.predict_bins(enc, self.outcomes.bin_edges)  # type: ignore[union-attr]

    def predict_proba_all_actions(self, X: np.ndarray) -> np.ndarray:
        """(n, |A|, |O|) distributions over outcomes for every action."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack(
            [self.predict_proba(X, a) for a in range(self.n_actions)], axis=1
        )

    def predict_value(self, X: np.ndarray, action: int) -> np.ndarray:
        """Scalar outcome prediction per context (continuous task only)."""
        if self.outcomes.is_discrete:
            raise StateError("scalar predictions are only defined for continuous outcomes")
        if not self.fitted:
            raise StateError("outcome predictor is not fitted")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        actions = np.full(X.shape[0], action, dtype=int)
        if self.config.kind == "table":
            probs = np.stack([self.table.lookup(k) for k in self._table_keys(X, actions)])  # type: ignore[union-attr]
            return probs @ self.outcomes.midpoints()
        enc = self._encode(X, actions)
        core = self.knn if self.knn is not None else self.forest
        return core.predict_mean(enc)  # type: ignore[union-attr]

    def to_json(self) -> dict:
        out: dict = {
            "schema": MODEL_SCHEMA,
            "role": "outcome",
            "config": self.config.to_json(),
            "n_actions": self.n_actions,
            "outcomes": _outcome_space_json(self.outcomes),
        }
        if self.standardizer is not None:
            out["standardizer"] = self.standardizer.to_json()
        out["learner"] = _core_payload(self)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "OutcomePredictor":
        _check_schema(obj)
        config = LearnerConfig.from_json(obj["config"])
        model = cls(
            config=config,
            outcomes=_outcome_space_from_json(obj["outcomes"]),
            n_actions=obj["n_actions"],
        )
        if "standardizer" in obj:
            model.standardizer = Standardizer.from_json(obj["standardizer"])
        _restore_core(model, config, obj["learner"])
        model.fitted = True
        return model


def _outcome_space_json(space: OutcomeSpace) -> dict:
    if space.is_discrete:
        return {"kind": "discrete", "labels": list(space.labels)}
    return {"kind": "continuous", "bin_edges": list(space.bin_edges)}


def _outcome_space_from_json(obj: dict) -> OutcomeSpace:
    if obj["kind"] == "discrete":
        return OutcomeSpace.discrete(obj["labels"])
    return OutcomeSpace.continuous(obj["bin_edges"])


def _check_schema(obj: dict) -> None:
    if obj.get("schema") != MODEL_SCHEMA:
        raise ValidationError(
            f"model document has schema {obj.get('schema')!r}, expected {MODEL_SCHEMA!r}"
        )


def _core_payload(model) -> dict:
    if model.knn is not None:
        return model.knn.to_json()
    if model.forest is not None:
        return model.forest.to_json()
    if model.table is not None:
        return model.table.to_json()
    raise StateError("model is not fitted")


def _restore_core(model, config: LearnerConfig, payload: dict) -> None:
    if config.kind == "knn":
        model.knn = KnnCore.from_json(payload)
    elif config.kind == "forest":
        model.forest = ForestCore.from_json(payload, config)
    else:
        model.table = TableCore.from_json(payload)


# ---------------------------------------------------------------------------
# reward models


@dataclass
class RewardModel:
    """Per-actor desirability model over (context, action, outcome)."""

    actor: str
    config: LearnerConfig
    outcomes: OutcomeSpace
    n_actions: int
    standardizer: Standardizer | None = None
    knn: KnnCore | None = None
    forest: ForestCore | None = None
    table: TableCore | None = None
    fitted: bool = False

    def _encode(self, X: np.ndarray, actions: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.outcomes.is_discrete:
            tail = _onehot(outcomes, self.outcomes.m)
            cont = X
        else:
            tail = np.empty((X.shape[0], 0))
            cont = np.hstack([X, np.asarray(outcomes, dtype=float)[:, None]])
        if self.standardizer is not None:
            cont = self.standardizer.transform(cont)
        return np.hstack([cont, _onehot(actions, self.n_actions), tail])

    def fit(self, augmented: AugmentedDataset, seed: int = 0) -> "RewardModel":
        base = augmented.base
        y = augmented.rewards[:, augmented.actors.index(self.actor)]
        if self.config.kind == "table":
            if not self.outcomes.is_discrete:
                raise ParameterError("table reward models require discrete outcomes")
            keys = [
                f"{int(a)}|{int(o)}" for a, o in zip(base.actions, base.outcomes)
            ]
            self.table = TableCore().fit_means(keys, y)
            self.fitted = True
            return self
        if self.config.kind == "knn":
            cont = (
                base.features
                if self.outcomes.is_discrete
                else np.hstack([base.features, np.asarray(base.outcomes, float)[:, None]])
            )
            self.standardizer = Standardizer.fit(cont)
        enc = self._encode(base.features, base.actions, base.outcomes)
        if self.config.kind == "knn":
            self.knn = KnnCore(self.config.k).fit(enc, y)
        else:
            rng = substream(seed, f"reward-fit:{self.actor}")
            self.forest = ForestCore(self.config).fit(enc, y, "regress", 0, rng)
        self.fitted = True
        return self

    def predict(self, X: np.ndarray, actions: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
        """Predicted rewards clamped to [0, 1]."""
        if not self.fitted:
            raise StateError("reward model is not fitted")
        if self.config.kind == "table":
            keys = [f"{int(a)}|{int(o)}" for a, o in zip(actions, outcomes)]
            vals = np.asarray([self.table.lookup(k)[0] for k in keys])  # type: ignore[union-attr]
            return np.clip(vals, 0.0, 1.0)
        enc = self._encode(X, actions, outcomes)
        core = self.knn if self.knn is not None else self.forest
        return np.clip(core.predict_mean(enc), 0.0, 1.0)  # type: ignore[union-attr]

    def predict_matrix_batch(self, X: np.ndarray) -> np.ndarray:
        """(n, |A|, |O|) predicted rewards; outcome slots are bins when continuous."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = X.shape[0]
        outcome_reprs = (
            np.arange(self.outcomes.m)
            if self.outcomes.is_discrete
            else self.outcomes.midpoints()
        )
        out = np.empty((n, self.n_actions, self.outcomes.m))
        for a in range(self.n_actions):
            for o_slot, o_repr in enumerate(outcome_reprs):
                out[:, a, o_slot] = self.predict(
                    X,
                    np.full(n, a, dtype=int),
                    np.full(n, o_repr),
                )
        return out

    def to_json(self) -> dict:
        out: dict = {
            "schema": MODEL_SCHEMA,
            "role": "reward",
            "actor": self.actor,
            "config": self.config.to_json(),
            "n_actions": self.n_actions,
            "outcomes": _outcome_space_json(self.outcomes),
        }
        if self.standardizer is not None:
            out["standardizer"] = self.standardizer.to_json()
        out["learner"] = _core_payload(self)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "RewardModel":
        _check_schema(obj)
        config = LearnerConfig.from_json(obj["config"])
        model = cls(
            actor=obj["actor"],
            config=config,
            outcomes=_outcome_space_from_json(obj["outcomes"]),
            n_actions=obj["n_actions"],
        )
        if "standardizer" in obj:
            model.standardizer = Standardizer.from_json(obj["standardizer"])
        _restore_core(model, config, obj["learner"])
        model.fitted = True
        return model


def predict_reward_matrix(
    model: RewardModel, context: Context | np.ndarray, outcomes: OutcomeSpace | None = None
) -> PredictedRewardMatrix:
    """Predicted |A| x |O| reward matrix for one context, entries in [0, 1]."""
    feats = context.features if isinstance(context, Context) else np.asarray(context, float)
    values = model.predict_matrix_batch(feats[None, :])[0]
    return PredictedRewardMatrix(actor=model.actor, values=values)


# ---------------------------------------------------------------------------
# fitting entry points


def _holdout_split(n: int, rng: np.random.Generator, frac: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    n_hold = int(round(n * frac))
    if n_hold == 0 or n_hold == n:
        return perm, perm  # degenerate small data: evaluate in-sample
    return perm[n_hold:], perm[:n_hold]


def _timed_fit(builder, *args):
    t0 = time.perf_counter()
    model = builder(*args)
    return model, time.perf_counter() - t0


def _predict_rowwise(model: "OutcomePredictor", data: Dataset) -> np.ndarray:
    """Outcome distribution for each row under its own recorded action."""
    out = np.empty((data.n, model.outcomes.m))
    for a in np.unique(data.actions):
        idx = np.nonzero(data.actions == a)[0]
        out[idx] = model.predict_proba(data.features[idx], int(a))
    return out


def fit_outcome_model(
    dataset: Dataset, config: LearnerConfig = DEFAULT_OUTCOME_CONFIG, seed: int = 0
) -> tuple[OutcomePredictor, ModelReport]:
    """Fit the outcome predictor and report its held-out error.

    The error comes from an internal seeded 80/20 split; the returned model
    is refit on all rows.  Single-class data still fits (the predictor is
    constant) and is flagged as degenerate in the report.
    """
    if dataset.n == 0:
        raise ValidationError("cannot fit an outcome model on an empty dataset")
    model = OutcomePredictor(
        config=config, outcomes=dataset.schema.outcomes, n_actions=dataset.schema.actions.k
    )
    model, fit_seconds = _timed_fit(lambda: model.fit(dataset, seed=seed))

    if config.kind == "table":
        # tables do not generalize; the report carries their recall error
        probe, hold = model, dataset
        error_prefix = "in_sample_"
    else:
        rng = substream(seed, "outcome-holdout")
        train_idx, hold_idx = _holdout_split(dataset.n, rng)
        probe = OutcomePredictor(
            config=config, outcomes=dataset.schema.outcomes, n_actions=dataset.schema.actions.k
        ).fit(dataset.subset(train_idx), seed=seed)
        hold = dataset.subset(hold_idx)
        error_prefix = ""
    hold_probs = _predict_rowwise(probe, hold)
    if dataset.schema.outcomes.is_discrete:
        error = float(np.mean(np.argmax(hold_probs, axis=1) != hold.outcomes))
        error_kind = error_prefix + "error_rate"
    else:
        preds = hold_probs @ dataset.schema.outcomes.midpoints()
        error = float(np.mean(np.abs(preds - hold.outcomes)))
        error_kind = error_prefix + "mae"

    n_probe = min(dataset.n, 100)
    t0 = time.perf_counter()
    _predict_rowwise(model, dataset.subset(np.arange(n_probe)))
    predict_rate = (time.perf_counter() - t0) / n_probe
    degenerate = dataset.schema.outcomes.is_discrete and np.unique(dataset.outcomes).size == 1
    report = ModelReport(
        error=error,
        error_kind=error_kind,
        hyperparams=config.hyperparams(),
        grid_size=1,
        fit_seconds=fit_seconds,
        predict_seconds_per_row=predict_rate,
        degenerate=degenerate,
    )
    return model, report


def fit_reward_model(
    augmented: AugmentedDataset,
    actor: str,
    grid: Sequence[LearnerConfig] = DEFAULT_REWARD_GRID,
    seed: int = 0,
) -> tuple[RewardModel, ModelReport]:
    """Grid-search a reward model for one actor by held-out MAE.

    Ties keep the earlier grid point; the winner is refit on all rows.
    """
    if not grid:
        raise ParameterError("reward model grid must not be empty")
    actor_idx = augmented.actors.index(actor)
    base = augmented.base
    y = augmented.rewards[:, actor_idx]
    rng = substream(seed, f"reward-holdout:{actor}")
    train_idx, hold_idx = _holdout_split(augmented.n, rng)
    train = augmented.subset(train_idx)
    hold_base = base.subset(hold_idx)
    hold_y = y[hold_idx]

    best_mae = np.inf
    best_config = None
    t0 = time.perf_counter()
    for config in grid:
        candidate = RewardModel(
            actor=actor,
            config=config,
            outcomes=base.schema.outcomes,
            n_actions=base.schema.actions.k,
        )
        if config.kind == "table":
            # tables do not generalize to unseen keys; score their recall
            candidate.fit(augmented, seed=seed)
            preds = candidate.predict(base.features, base.actions, base.outcomes)
            mae = float(np.mean(np.abs(preds - y)))
        else:
            candidate.fit(train, seed=seed)
            preds = candidate.predict(hold_base.features, hold_base.actions, hold_base.outcomes)
            mae = float(np.mean(np.abs(preds - hold_y)))
        if mae < best_mae - 1e-15:
            best_mae = mae
            best_config = config
    fit_seconds = time.perf_counter() - t0

    model = RewardModel(
        actor=actor,
        config=best_config,  # type: ignore[arg-type]
        outcomes=base.schema.outcomes,
        n_actions=base.schema.actions.k,
    ).fit(augmented, seed=seed)
    n_probe = min(augmented.n, 100)
    t0 = time.perf_counter()
    model.predict(base.features[:n_probe], base.actions[:n_probe], base.outcomes[:n_probe])
    predict_rate = (time.perf_counter() - t0) / n_probe
    report = ModelReport(
        error=best_mae,
        error_kind="mae",
        hyperparams=best_config.hyperparams(),  # type: ignore[union-attr]
        grid_size=len(grid),
        fit_seconds=fit_seconds,
        predict_seconds_per_row=predict_rate,
    )
    return model, report


# ---------------------------------------------------------------------------
# treatment-effect estimation (two independent arm regressors)


@dataclass
class CateModel:
    """Per-arm outcome regressors; their difference estimates the effect."""

    control: "ArmRegressor"
    treated: "ArmRegressor"

    def cate(self, X: np.ndarray) -> np.ndarray:
        return self.treated.predict(X) - self.control.predict(X)


@dataclass
class ArmRegressor:
    config: LearnerConfig
    standardizer: Standardizer | None = None
    knn: KnnCore | None = None
    forest: ForestCore | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, rng) -> "ArmRegressor":
        if self.config.kind == "knn":
            self.standardizer = Standardizer.fit(X)
            self.knn = KnnCore(self.config.k).fit(self.standardizer.transform(X), y)
        elif self.config.kind == "forest":
            self.forest = ForestCore(self.config).fit(X, y, "regress", 0, rng)
        else:
            raise ParameterError("arm regressors support knn and forest kinds only")
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.knn is not None:
            return self.knn.predict_mean(self.standardizer.transform(X))  # type: ignore[union-attr]
        if self.forest is not None:
            return self.forest.predict_mean(X)
        raise StateError("arm regressor is not fitted")


def fit_cate_tlearner(
    dataset: Dataset, config: LearnerConfig = DEFAULT_OUTCOME_CONFIG, seed: int = 0
) -> CateModel:
    """Fit treated/control regressors for a binary-action continuous task."""
    if dataset.schema.actions.k != 2:
        raise ValidationError("treatment-effect estimation requires exactly 2 actions")
    if dataset.schema.outcomes.is_discrete:
        raise ValidationError("treatment-effect estimation requires continuous outcomes")
    arms = []
    for arm in (0, 1):
        idx = np.nonzero(dataset.actions == arm)[0]
        if idx.size == 0:
            raise ValidationError(f"arm {arm} has no rows; cannot fit its regressor")
        rng = substream(seed, f"cate-arm:{arm}")
        arms.append(
            ArmRegressor(config=config).fit(
                dataset.features[idx], dataset.outcomes[idx].astype(float), rng
            )
        )
    return CateModel(control=arms[0], treated=arms[1])
