"""K-Means clustering of instance feature vectors and selection of k."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DataError, check

N_INIT = 10
MAX_ITER = 300
TOL = 1e-4
METHODS = ("silhouette", "elbow-distortion")


@dataclass(frozen=True, eq=False)
class ClusteringModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    seed: int
    inertia_trace: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "inertia": float(self.inertia),
            "centroids": [[float(v) for v in c] for c in self.centroids],
            "assignments": [int(a) for a in self.assignments],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ClusteringModel":
        return cls(int(d["k"]), np.array(d["centroids"], dtype=float),
                   np.array(d["assignments"], dtype=int), float(d["inertia"]), int(d["seed"]))


@dataclass(frozen=True)
class KSelectionReport:
    method: str
    candidate_ks: tuple
    scores: tuple  # nan where no valid fit exists for that k
    chosen_k: int


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("points must be a non-empty 2-d array")
    return X


def _sq_dists(X, C):
    return cdist(X, C, "sqeuclidean")


def _nearest(X, C):
    d = _sq_dists(X, C)
    labels = d.argmin(axis=1)  # first minimum: ties go to the lowest index
    return labels, d[np.arange(len(X)), labels]


def _kmeans_pp(X, k, rng):
    n = len(X)
    centers = [X[rng.integers(n)]]
    closest = ((X - centers[0]) ** 2).sum(1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            raise DataError(f"k={k} exceeds the number of distinct points")
        idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
        idx = min(idx, n - 1)
        centers.append(X[idx])
        closest = np.minimum(closest, ((X - X[idx]) ** 2).sum(1))
    return np.array(centers)


def _lloyd(X, centers, max_iter, tol):
    """Lloyd iterations from ``centers``; returns (centers, labels, inertia, trace)."""
    k = len(centers)
    centers = centers.copy()
    threshold = tol * X.var(axis=0).mean()
    trace = []
    for it in range(max_iter + 1):
        labels, d = _nearest(X, centers)
        counts = np.bincount(labels, minlength=k)
        repaired = set()
        while (counts == 0).any():
            # move an empty centroid onto the worst-served point
            j = int(np.flatnonzero(counts == 0)[0])
            if d.max() <= 0:
                raise DataError(f"k={k} exceeds the number of distinct points")
            worst = int(d.argmax())
            if j in repaired:
                raise DataError(f"could not repair empty cluster {j}")
            repaired.add(j)
            centers[j] = X[worst]
            labels, d = _nearest(X, centers)
            counts = np.bincount(labels, minlength=k)
        trace.append(float(d.sum()))
        if it == max_iter:
            break
        new = np.zeros_like(centers)
        np.add.at(new, labels, X)
        new /= counts[:, None]
        shift = ((new - centers) ** 2).sum()
        centers = new
        if shift <= threshold:
            labels, d = _nearest(X, centers)
            counts = np.bincount(labels, minlength=k)
            if (counts > 0).all():
                trace.append(float(d.sum()))
                break
    return centers, labels, trace[-1], trace


def _restart(X, k, seed, restart, max_iter, tol):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(restart,)))
    return _lloyd(X, _kmeans_pp(X, k, rng), max_iter, tol)


def kmeans_fit(points, k: int, seed: int, n_init: int = N_INIT, max_iter: int = MAX_ITER,
               tol: float = TOL, n_jobs: int = 1) -> ClusteringModel:
    """K-Means with k-means++ seeding, keeping the best of ``n_init`` restarts.

    Restart ``r`` draws from ``SeedSequence(seed, spawn_key=(r,))`` so the
    result does not depend on ``n_jobs``.
    """
    X = _as_points(points)
    if k < 1:
        raise DataError("k must be a positive integer")
    if k > len(X):
        raise DataError(f"k={k} exceeds the number of points ({len(X)})")
    args = [(X, k, seed, r, max_iter, tol) for r in range(n_init)]
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            runs = list(pool.map(lambda a: _restart(*a), args))
    else:
        runs = [_restart(*a) for a in args]
    best = min(range(n_init), key=lambda r: (runs[r][2], r))
    return _model(X, runs[best], seed)


def _model(X, run, seed) -> ClusteringModel:
    centers, labels, inertia, trace = run
    check(np.bincount(labels, minlength=len(centers)).min() > 0, "fitted model has an empty cluster")
    centers = np.array(centers)
    centers.setflags(write=False)
    labels = np.array(labels, dtype=int)
    labels.setflags(write=False)
    return ClusteringModel(len(centers), centers, labels, float(inertia), int(seed), tuple(trace))


def refine(points, model: ClusteringModel, max_iter: int = MAX_ITER, tol: float = TOL) -> ClusteringModel:
    """Fit k+1 clusters starting from ``model`` plus its worst-served point.

    The result never has larger inertia than ``model``.
    """
    X = _as_points(points)
    labels, d = _nearest(X, model.centroids)
    if d.max() <= 0:
        raise DataError(f"k={model.k + 1} exceeds the number of distinct points")
    start = np.vstack([model.centroids, X[int(d.argmax())]])
    return _model(X, _lloyd(X, start, max_iter, tol), model.seed)


def assign(points, model: ClusteringModel) -> np.ndarray:
    """Nearest centroid per point (Euclidean, ties to the lowest index)."""
    X = _as_points(points)
    if X.shape[1] != model.centroids.shape[1]:
        raise DataError(f"dimension mismatch: points have {X.shape[1]} features, "
                        f"centroids {model.centroids.shape[1]}")
    return _nearest(X, model.centroids)[0]


def distortion(points, model: ClusteringModel) -> float:
    """Mean squared distance of each point to its assigned centroid."""
    X = _as_points(points)
    if X.shape[1] != model.centroids.shape[1]:
        raise DataError("dimension mismatch between points and centroids")
    labels = np.asarray(model.assignments)
    if len(labels) != len(X):
        raise DataError("model assignments do not match the number of points")
    return float(((X - model.centroids[labels]) ** 2).sum() / len(X))


def silhouette(points, assignments, chunk: int = 1024) -> float:
    """Mean silhouette coefficient; points in singleton clusters score 0."""
    X = _as_points(points)
    labels = np.asarray(assignments)
    if len(labels) != len(X):
        raise DataError("assignments and points differ in length")
    uniq, labels = np.unique(labels, return_inverse=True)
    if len(uniq) < 2:
        raise DataError("silhouette undefined for k=1")
    k = len(uniq)
    counts = np.bincount(labels, minlength=k).astype(float)
    onehot = np.zeros((len(X), k))
    onehot[np.arange(len(X)), labels] = 1.0
    scores = np.empty(len(X))
    for start in range(0, len(X), chunk):
        rows = slice(start, start + chunk)
        dist = cdist(X[rows], X)
        sums = dist @ onehot
        own = labels[rows]
        idx = np.arange(len(own))
        own_size = counts[own]
        a = sums[idx, own] / np.maximum(own_size - 1, 1)
        other = sums / counts
        other[idx, own] = np.inf
        b = other.min(axis=1)
        s = (b - a) / np.maximum(a, b)
        s[own_size == 1] = 0.0
        scores[rows] = np.nan_to_num(s, nan=0.0)
    return float(scores.mean())


def default_k_range(n_points: int) -> tuple[int, int]:
    return 2, min(20, n_points // 5)


def select_k(points, k_min: int, k_max: int, method: str = "silhouette", seed: int = 0,
             n_init: int = N_INIT, n_jobs: int = 1) -> tuple[ClusteringModel, KSelectionReport]:
    """Fit every k in ``[k_min, k_max]`` and pick one by silhouette or elbow.

    Each k keeps the better (by inertia) of an independent fit and a refinement
    of the previous k's model, so the distortion curve is non-increasing.
    Values of k that admit no fit (fewer distinct points than k) score nan.
    """
    X = _as_points(points)
    if method not in METHODS:
        raise DataError(f"unknown k selection method {method!r}")
    if not (2 <= k_min < k_max <= len(X)):
        raise DataError(f"invalid k range [{k_min}, {k_max}] for {len(X)} points")
    ks = list(range(k_min, k_max + 1))
    models: dict[int, ClusteringModel] = {}
    prev = None
    for k in ks:
        candidates = []
        try:
            candidates.append(kmeans_fit(X, k, seed, n_init=n_init, n_jobs=n_jobs))
        except DataError:
            pass
        if prev is not None:
            try:
                candidates.append(refine(X, prev))
            except DataError:
                pass
        if not candidates:
            break
        prev = min(candidates, key=lambda m: m.inertia)
        models[k] = prev
    if not models:
        raise DataError("no candidate k admits a valid clustering")

    if method == "silhouette":
        scores = [silhouette(X, models[k].assignments) if k in models else np.nan for k in ks]
        valid = [i for i, s in enumerate(scores) if not np.isnan(s)]
        best = max(valid, key=lambda i: (scores[i], -i))
    else:
        scores = [distortion(X, models[k]) if k in models else np.nan for k in ks]
        interior = [i for i in range(1, len(ks) - 1)
                    if not np.isnan(scores[i - 1] + scores[i] + scores[i + 1])]
        if not interior:
            raise DataError("elbow selection needs at least three valid candidate k")
        second = {i: scores[i - 1] - 2 * scores[i] + scores[i + 1] for i in interior}
        best = max(interior, key=lambda i: (second[i], -i))
    chosen = ks[best]
    report = KSelectionReport(method, tuple(ks), tuple(float(s) for s in scores), chosen)
    return models[chosen], report
