"""Random forest with Gini importance, multi-seed rank aggregation and top-K sweep."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _tree
from .errors import DimensionMismatch, MissingValues, SingleClass

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    mtry: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True
    seed: int = 0
    class_weight: str | None = None  # None or "balanced"
    n_jobs: int = 1

    def resolved_mtry(self, d: int) -> int:
        m = self.mtry if self.mtry is not None else math.ceil(math.sqrt(d))
        if not 1 <= m <= d:
            raise ValueError(f"mtry must lie in [1, {d}], got {m}")
        return m

    def with_seed(self, seed: int) -> "ForestParams":
        return ForestParams(**{**asdict(self), "seed": seed})

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    weight: np.ndarray
    impurity: np.ndarray
    seed: int
    n_samples: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _tree.predict_tree(X, self.feature, self.threshold, self.left, self.right, self.value)

    def impurity_decrease(self) -> np.ndarray:
        """Weighted Gini decrease per node (0 for leaves)."""
        internal = self.feature >= 0
        out = np.zeros(self.feature.size)
        if not internal.any():
            return out
        root = self.weight[0]
        node = np.flatnonzero(internal)
        l, r = self.left[node], self.right[node]
        wn = self.weight[node]
        dec = (
            wn * self.impurity[node] - self.weight[l] * self.impurity[l] - self.weight[r] * self.impurity[r]
        ) / root
        out[node] = np.maximum(dec, 0.0)
        return out

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "n_samples": int(self.n_samples),
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "weight": self.weight.tolist(),
            "impurity": self.impurity.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.array(d["feature"], dtype=np.int32),
            threshold=np.array(d["threshold"], dtype=np.float64),
            left=np.array(d["left"], dtype=np.int32),
            right=np.array(d["right"], dtype=np.int32),
            value=np.array(d["value"], dtype=np.float64),
            weight=np.array(d["weight"], dtype=np.float64),
            impurity=np.array(d["impurity"], dtype=np.float64),
            seed=int(d["seed"]),
            n_samples=int(d["n_samples"]),
        )


@dataclass(frozen=True, eq=False)
class RandomForest:
    trees: tuple[Tree, ...]
    feature_names: tuple[str, ...]
    params: ForestParams

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "icu_radiomics.random_forest",
                "version": FORMAT_VERSION,
                "params": self.params.as_dict(),
                "feature_names": list(self.feature_names),
                "trees": [t.to_dict() for t in self.trees],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "RandomForest":
        d = json.loads(text)
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported forest format version {d.get('version')!r}")
        return cls(
            tuple(Tree.from_dict(t) for t in d["trees"]),
            tuple(d["feature_names"]),
            ForestParams(**d["params"]),
        )


def tree_seed(seed: int, tree_index: int) -> int:
    """Independent 64-bit stream per tree, derived from the forest seed."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(tree_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _validate(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DimensionMismatch(f"X shape {X.shape} does not match {y.size} labels")
    if X.shape[0] < 2:
        raise SingleClass("need at least two samples")
    if np.isnan(X).any():
        raise MissingValues("X contains missing values; impute first")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    if y.min() == y.max():
        raise SingleClass("training labels contain a single class")
    return X, y


def _sample_weights(y: np.ndarray, mode: str | None) -> np.ndarray:
    if mode is None:
        return np.ones(y.size)
    if mode == "balanced":
        counts = np.bincount(y, minlength=2).astype(np.float64)
        return (y.size / (2.0 * counts))[y]
    raise ValueError(f"class_weight must be None or 'balanced', got {mode!r}")


def train_forest(X, y, params: ForestParams = ForestParams(), feature_names: Sequence[str] | None = None) -> RandomForest:
    X, y = _validate(X, y)
    n, d = X.shape
    if params.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if params.min_samples_leaf < 1:
        raise ValueError("min_samples_leaf must be >= 1")
    mtry = params.resolved_mtry(d)
    depth = -1 if params.max_depth is None else int(params.max_depth)
    xt = np.ascontiguousarray(X.T)
    y8 = y.astype(np.int8)
    w = _sample_weights(y, params.class_weight)
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{i}" for i in range(d))
    if len(names) != d:
        raise DimensionMismatch(f"{len(names)} feature names for {d} columns")

    def grow(t: int) -> Tree:
        seed = tree_seed(params.seed, t)
        if params.bootstrap:
            sample, seed = _tree.bootstrap_indices(n, np.uint64(seed))
        else:
            sample = np.arange(n, dtype=np.int64)
        arrays = _tree.build_tree(xt, y8, w, sample, mtry, depth, params.min_samples_leaf, np.uint64(seed))
        return Tree(*arrays, seed=int(seed), n_samples=n)

    if params.n_jobs > 1:
        with ThreadPoolExecutor(params.n_jobs) as pool:
            trees = tuple(pool.map(grow, range(params.n_trees)))
    else:
        trees = tuple(grow(t) for t in range(params.n_trees))
    return RandomForest(trees, names, params)


def predict_proba(forest: RandomForest, X) -> np.ndarray:
    """Mean leaf class-1 probability over trees."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise DimensionMismatch(f"expected {forest.n_features} columns, got shape {X.shape}")
    total = np.zeros(X.shape[0])
    for t in forest.trees:
        total += t.predict(X)
    return total / len(forest.trees)


def raw_gini_importance(forest: RandomForest) -> np.ndarray:
    """Mean over trees of the summed weighted Gini decrease per feature."""
    d = forest.n_features
    total = np.zeros(d)
    for t in forest.trees:
        internal = t.feature >= 0
        total += np.bincount(t.feature[internal], weights=t.impurity_decrease()[internal], minlength=d)
    return total / len(forest.trees)


def gini_importance(forest: RandomForest) -> np.ndarray:
    """Raw importance normalized to sum 1 (uniform if no split decreased impurity)."""
    raw = raw_gini_importance(forest)
    s = raw.sum()
    if s <= 0:
        return np.full(raw.size, 1.0 / raw.size)
    return raw / s


def rank_positions(importance: np.ndarray) -> np.ndarray:
    """0-based rank of every feature: descending importance, ties by index."""
    order = np.lexsort((np.arange(importance.size), -importance))
    ranks = np.empty(importance.size, dtype=np.int64)
    ranks[order] = np.arange(importance.size)
    return ranks


@dataclass(frozen=True, eq=False)
class FeatureRanking:
    names: tuple[str, ...]
    summed_score: np.ndarray
    mean_importance: np.ndarray
    n_runs: int
    final_order: np.ndarray = field(init=False)

    def __post_init__(self):
        order = np.lexsort((np.arange(self.summed_score.size), self.summed_score))
        object.__setattr__(self, "final_order", order)

    def top(self, k: int) -> np.ndarray:
        return self.final_order[:k]

    def top_names(self, k: int) -> list[str]:
        return [self.names[i] for i in self.top(k)]

    def rows(self) -> list[dict]:
        """Report rows in rank order: rank (1-based), name, summed score, mean importance."""
        return [
            {
                "rank": r + 1,
                "name": self.names[i],
                "summed_score": int(self.summed_score[i]),
                "mean_importance": float(self.mean_importance[i]),
            }
            for r, i in enumerate(self.final_order)
        ]


def aggregate_ranks(
    X,
    y,
    params: ForestParams = ForestParams(),
    n_runs: int = 100,
    base_seed: int = 0,
    feature_names: Sequence[str] | None = None,
) -> FeatureRanking:
    """Sum per-run 0-based importance ranks over ``n_runs`` seeds ``base_seed + r``."""
    X, y = _validate(X, y)
    d = X.shape[1]
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{i}" for i in range(d))
    summed = np.zeros(d, dtype=np.int64)
    imp_total = np.zeros(d)
    for r in range(n_runs):
        forest = train_forest(X, y, params.with_seed(base_seed + r), names)
        imp = gini_importance(forest)
        summed += rank_positions(imp)
        imp_total += imp
    return FeatureRanking(names, summed, imp_total / n_runs, n_runs)


@dataclass(frozen=True)
class SweepResult:
    best_k: int
    ks: np.ndarray
    mean_auc: np.ndarray


def top_k_sweep(
    X,
    y,
    ranking: FeatureRanking,
    k_max: int = 100,
    cv_seed: int = 0,
    params: ForestParams = ForestParams(),
    n_folds: int = 5,
    scorer: Callable | None = None,
) -> SweepResult:
    """Mean cross-validated AUC of a model on the top-K ranked features, K = 1..k_max.

    ``scorer(X_train, y_train, X_test) -> scores`` defaults to a forest with
    ``params``. Ties in AUC go to the smaller K.
    """
    from .evalharness.metrics import roc_auc
    from .evalharness.cv import stratified_kfold

    X, y = _validate(X, y)
    if not 1 <= k_max <= X.shape[1]:
        raise ValueError(f"k_max must lie in [1, {X.shape[1]}], got {k_max}")
    if scorer is None:
        def scorer(xtr, ytr, xte):
            return predict_proba(train_forest(xtr, ytr, params), xte)

    folds = stratified_kfold(y, n_folds, cv_seed)
    ks = np.arange(1, k_max + 1)
    curve = np.empty(k_max)
    for k in ks:
        cols = ranking.top(int(k))
        aucs = []
        for test in folds:
            train = np.setdiff1d(np.arange(y.size), test)
            s = scorer(X[np.ix_(train, cols)], y[train], X[np.ix_(test, cols)])
            aucs.append(roc_auc(s, y[test]))
        curve[k - 1] = float(np.mean(aucs))
    best = int(ks[int(np.argmax(curve))])
    return SweepResult(best, ks, curve)
