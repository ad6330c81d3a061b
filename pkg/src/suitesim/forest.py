"""Random-forest regression of algorithm performance and cross-suite MDAE."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import LabeledCorpus
from .errors import DataError

LEAF = -1


@dataclass(frozen=True)
class ForestConfig:
    tree_count: int = 100
    bootstrap: bool = True
    split_candidate_fraction: float = 1.0
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_depth: int | None = None
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.tree_count < 1 or self.min_samples_split < 2 or self.min_samples_leaf < 1:
            raise DataError("forest counts must be positive (min_samples_split >= 2)")
        if not 0 < self.split_candidate_fraction <= 1:
            raise DataError("split_candidate_fraction must lie in (0, 1]")
        if self.max_depth is not None and self.max_depth < 0:
            raise DataError("max_depth must be nonnegative")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.pop("n_jobs")
        return d


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Array-encoded binary tree; ``feature[i] == LEAF`` marks a leaf.

    Samples with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=int)
        for i in range(self.node_count):  # children always follow their parent
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            n = node[idx]
            go_left = X[idx, self.feature[n]] <= self.threshold[n]
            node[idx] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] != LEAF
        return self.value[node]


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple
    config: ForestConfig
    train_suite: str
    feature_count: int


@dataclass(frozen=True, eq=False)
class EvaluationMatrix:
    """Rows are train suites, columns test suites; the diagonal is resubstitution error."""

    train_suites: tuple
    test_suites: tuple
    mdae: np.ndarray
    train_mdae: np.ndarray

    def cell(self, train: str, test: str) -> float:
        return float(self.mdae[self.train_suites.index(train), self.test_suites.index(test)])


def _best_split(X, y, features, min_leaf):
    """Lowest weighted child SSE over candidate features; ties keep the earliest."""
    best = None
    n = len(y)
    yc = y - y.mean()
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], yc[order]
        valid = xs[:-1] < xs[1:]
        valid[: min_leaf - 1] = False
        if min_leaf > 1:
            valid[n - min_leaf:] = False
        if not valid.any():
            continue
        csum = np.cumsum(ys)[:-1]
        csq = np.cumsum(ys * ys)
        total, total_sq = csum[-1] + ys[-1], csq[-1]
        n_left = np.arange(1, n)
        sse = (csq[:-1] - csum ** 2 / n_left) + (total_sq - csq[:-1] - (total - csum) ** 2 / (n - n_left))
        sse = np.where(valid, sse, np.inf)
        pos = int(np.argmin(sse))
        if best is None or sse[pos] < best[0]:
            lo, hi = xs[pos], xs[pos + 1]
            thr = lo + (hi - lo) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = (sse[pos], f, thr)
    return best


def fit_tree(features, targets, config: ForestConfig, rng: np.random.Generator) -> RegressionTree:
    """Greedy CART regression tree minimizing weighted child variance."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or len(X) == 0 or len(X) != len(y):
        raise DataError("fit_tree needs a non-empty feature matrix and one target per row")
    n_features = X.shape[1]
    n_try = max(1, int(config.split_candidate_fraction * n_features))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        if (len(idx) < config.min_samples_split
                or (config.max_depth is not None and depth >= config.max_depth)
                or ys.min() == ys.max()):
            continue
        if n_try < n_features:
            cand = np.sort(rng.choice(n_features, n_try, replace=False))
        else:
            cand = range(n_features)
        split = _best_split(X[idx], ys, cand, config.min_samples_leaf)
        if split is None:
            continue
        _, f, thr = split
        mask = X[idx, f] <= thr
        feature[node], threshold[node] = int(f), float(thr)
        left[node] = new_node(idx[mask])
        right[node] = new_node(idx[~mask])
        stack.append((right[node], idx[~mask], depth + 1))
        stack.append((left[node], idx[mask], depth + 1))

    arrays = [np.array(a, dtype=t) for a, t in
              ((feature, int), (threshold, float), (left, int), (right, int), (value, float))]
    for a in arrays:
        a.setflags(write=False)
    return RegressionTree(*arrays)


def tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _fit_one(X, y, config, index):
    rng = tree_rng(config.seed, index)
    if config.bootstrap:
        sample = rng.integers(0, len(y), len(y))
        return fit_tree(X[sample], y[sample], config, rng)
    return fit_tree(X, y, config, rng)


def fit_forest(features, targets, config: ForestConfig = ForestConfig(), train_suite: str = "") -> ForestModel:
    """Train ``config.tree_count`` trees, tree ``i`` on its own seeded stream."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or len(y) == 0:
        raise DataError(f"suite {train_suite!r} has no training samples")
    if len(y) < 2:
        raise DataError(f"suite {train_suite!r} needs at least 2 labeled records")
    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            trees = list(pool.map(lambda i: _fit_one(X, y, config, i), range(config.tree_count)))
    else:
        trees = [_fit_one(X, y, config, i) for i in range(config.tree_count)]
    return ForestModel(tuple(trees), config, train_suite, X.shape[1])


def fit_suite_forest(labeled: LabeledCorpus, suite_id: str, config: ForestConfig = ForestConfig()) -> ForestModel:
    X, y = labeled.suite(suite_id)
    return fit_forest(X, y, config, suite_id)


def predict(model: ForestModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.feature_count:
        raise DataError(f"expected {model.feature_count} features, got shape {X.shape}")
    total = np.zeros(len(X))
    for tree in model.trees:
        total += tree.predict(X)
    return total / len(model.trees)


def mdae(predicted, actual) -> float:
    """Median absolute error; even counts average the two middle values."""
    p = np.asarray(predicted, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if len(p) != len(a):
        raise DataError("predicted and actual differ in length")
    if len(p) == 0:
        raise DataError("mdae of empty vectors")
    return float(np.median(np.abs(p - a)))


def cross_suite_evaluate(labeled: LabeledCorpus, config: ForestConfig = ForestConfig()) -> EvaluationMatrix:
    """Train one forest per suite and score it on every suite."""
    suites = labeled.corpus.suite_ids
    if len(suites) < 2:
        raise DataError("need at least 2 suites")
    data = {s: labeled.suite(s) for s in suites}
    for s, (_, y) in data.items():
        if len(y) < 2:
            raise DataError(f"suite {s!r} has fewer than 2 labeled records")
    grid = np.zeros((len(suites), len(suites)))
    for i, s in enumerate(suites):
        model = fit_forest(*data[s], config, s)
        for j, t in enumerate(suites):
            X, y = data[t]
            grid[i, j] = mdae(predict(model, X), y)
    grid.setflags(write=False)
    train = grid.diagonal().copy()
    train.setflags(write=False)
    return EvaluationMatrix(tuple(suites), tuple(suites), grid, train)
