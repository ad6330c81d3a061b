"""Suite meta-representations from cluster occupancy, and suite similarity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError, check


@dataclass(frozen=True, eq=False)
class CoverageMatrix:
    """Fraction of each suite's instances falling in each cluster."""

    suite_ids: tuple
    rows: np.ndarray  # shape (m, k), each row sums to 1

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] != len(self.suite_ids):
            raise DataError("coverage rows must form an m x k matrix")
        if (rows < 0).any():
            raise DataError("coverage entries must be nonnegative")
        if not np.allclose(rows.sum(axis=1), 1.0, rtol=0, atol=1e-9):
            raise DataError("coverage rows must sum to 1")
        rows.setflags(write=False)
        object.__setattr__(self, "suite_ids", tuple(self.suite_ids))
        object.__setattr__(self, "rows", rows)

    @property
    def k(self) -> int:
        return self.rows.shape[1]

    def row(self, suite_id: str) -> np.ndarray:
        return self.rows[self.suite_ids.index(suite_id)]


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    suite_ids: tuple
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        m = len(self.suite_ids)
        if v.shape != (m, m):
            raise DataError("similarity matrix shape does not match suite ids")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12):
            raise DataError("similarity matrix is not symmetric")
        v.setflags(write=False)
        object.__setattr__(self, "suite_ids", tuple(self.suite_ids))
        object.__setattr__(self, "values", v)

    def reordered(self, order: Sequence[str]) -> "SimilarityMatrix":
        idx = [self.suite_ids.index(s) for s in order]
        return SimilarityMatrix(tuple(order), self.values[np.ix_(idx, idx)])


class Merge(NamedTuple):
    left: int
    right: int
    distance: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge tree over suites.

    Leaves are nodes ``0..m-1`` (``leaf_ids`` order); merge ``t`` creates node
    ``m + t``.
    """

    merges: tuple
    leaf_ids: tuple


def coverage_matrix(suite_labels: Sequence[str], assignments, k: int,
                    suite_ids: Sequence[str] | None = None) -> CoverageMatrix:
    labels = list(suite_labels)
    clusters = np.asarray(assignments, dtype=int)
    if len(labels) == 0 or len(labels) != len(clusters):
        raise DataError("suite labels and assignments must have equal, nonzero length")
    if (clusters < 0).any() or (clusters >= k).any():
        raise DataError(f"assignment outside [0, {k})")
    order = tuple(suite_ids) if suite_ids is not None else tuple(dict.fromkeys(labels))
    labels_arr = np.array(labels, dtype=object)
    rows = []
    for s in order:
        counts = np.bincount(clusters[labels_arr == s], minlength=k).astype(float)
        if counts.sum() == 0:
            raise DataError(f"suite {s!r} has no instances")
        rows.append(counts / counts.sum())
    return CoverageMatrix(order, np.array(rows))


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise DataError("cosine similarity needs two vectors of equal length")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise DataError("cosine similarity undefined for zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def similarity_matrix(cov: CoverageMatrix) -> SimilarityMatrix:
    m = len(cov.suite_ids)
    if m < 2:
        raise DataError("need at least 2 suites")
    values = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            values[i, j] = values[j, i] = cosine_similarity(cov.rows[i], cov.rows[j])
    return SimilarityMatrix(cov.suite_ids, values)


def agglomerate(sim: SimilarityMatrix) -> Dendrogram:
    """Average-linkage clustering on distance ``1 - similarity``.

    Among equally close pairs the one with the lowest (smaller, larger) node
    ids merges first.
    """
    m = len(sim.suite_ids)
    if m < 2:
        raise DataError("need at least 2 suites")
    dist = 1.0 - sim.values
    np.fill_diagonal(dist, 0.0)
    members = {i: [i] for i in range(m)}
    merges = []
    for step in range(m - 1):
        active = sorted(members)
        best = None
        for a_pos, a in enumerate(active):
            for b in active[a_pos + 1:]:
                d = dist[np.ix_(members[a], members[b])].mean()
                if best is None or d < best[0]:
                    best = (d, a, b)
        d, a, b = best
        merged = members.pop(a) + members.pop(b)
        members[m + step] = merged
        merges.append(Merge(a, b, float(d), len(merged)))
    for prev, cur in zip(merges, merges[1:]):
        check(cur.distance >= prev.distance - 1e-12, "average linkage produced a non-monotone merge")
    return Dendrogram(tuple(merges), sim.suite_ids)


def leaf_order(dendrogram: Dendrogram) -> list[str]:
    m = len(dendrogram.leaf_ids)
    order, stack = [], [m + len(dendrogram.merges) - 1]
    while stack:
        node = stack.pop()
        if node < m:
            order.append(dendrogram.leaf_ids[node])
        else:
            merge = dendrogram.merges[node - m]
            stack.extend((merge.right, merge.left))
    return order
