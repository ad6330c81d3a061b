"""Link feature-space similarity to cross-suite model error, and build test suites."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import rankdata

from .clustering import ClusteringModel
from .coverage import SimilarityMatrix
from .data import Corpus, LabeledCorpus
from .errors import DataError
from .forest import EvaluationMatrix

CONSISTENT = "consistent"
VIOLATED = "violated"
INSUFFICIENT = "insufficient-variation"


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian-mixture corpus with a per-cluster affine target rule.

    ``suites`` holds ``(label, mixture weights, instance count)`` triples and
    ``target_rules`` one ``(weights, offset)`` pair per cluster.
    """

    cluster_centers: Sequence[Sequence[float]]
    cluster_spread: float
    suites: Sequence[tuple]
    target_rules: Sequence[tuple]
    noise_scale: float = 0.0
    seed: int = 0
    algorithm: str = "synthetic"

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        return cls(
            cluster_centers=[list(map(float, c)) for c in d["cluster_centers"]],
            cluster_spread=float(d["cluster_spread"]),
            suites=[(str(s["label"]), list(map(float, s["weights"])), int(s["count"])) for s in d["suites"]],
            target_rules=[(list(map(float, r["weights"])), float(r["offset"])) for r in d["target_rules"]],
            noise_scale=float(d.get("noise_scale", 0.0)),
            seed=int(d.get("seed", 0)),
            algorithm=str(d.get("algorithm", "synthetic")),
        )


def sample_synthetic(spec: SyntheticSpec) -> tuple[LabeledCorpus, np.ndarray]:
    """Draw a corpus from ``spec``; also returns each record's planted cluster."""
    centers = np.asarray(spec.cluster_centers, dtype=float)
    if centers.ndim != 2 or len(centers) == 0 or len(spec.suites) == 0:
        raise DataError("synthetic spec needs at least one cluster and one suite")
    if spec.cluster_spread <= 0 or spec.noise_scale < 0:
        raise DataError("cluster_spread must be positive and noise_scale nonnegative")
    if len(spec.target_rules) != len(centers):
        raise DataError("one target rule per cluster is required")
    n_dim = centers.shape[1]
    rules_w = np.array([r[0] for r in spec.target_rules], dtype=float)
    rules_b = np.array([r[1] for r in spec.target_rules], dtype=float)
    if rules_w.shape != centers.shape:
        raise DataError("target rule weights must match the feature dimension")
    rng = np.random.default_rng(spec.seed)
    suites, ids, feats, planted = [], [], [], []
    for label, weights, count in spec.suites:
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(centers),) or (w < 0).any() or not np.isclose(w.sum(), 1.0):
            raise DataError(f"suite {label!r}: mixture weights must be nonnegative and sum to 1")
        if count < 1:
            raise DataError(f"suite {label!r}: instance count must be positive")
        cl = rng.choice(len(centers), size=count, p=w)
        x = centers[cl] + spec.cluster_spread * rng.standard_normal((count, n_dim))
        suites += [label] * count
        ids += [f"i{j}" for j in range(count)]
        feats.append(x)
        planted.append(cl)
    X = np.vstack(feats)
    cl = np.concatenate(planted)
    y = (X * rules_w[cl]).sum(axis=1) + rules_b[cl]
    if spec.noise_scale > 0:
        y = y + spec.noise_scale * rng.standard_normal(len(y))
    corpus = Corpus(suites, ids, X, [f"f_{j}" for j in range(n_dim)],
                    [label for label, _, _ in spec.suites])
    return LabeledCorpus(corpus, y, spec.algorithm), cl


def synth_corpus(spec: SyntheticSpec) -> LabeledCorpus:
    return sample_synthetic(spec)[0]


def _neighbors(features, threshold, chunk=2048):
    X = np.asarray(features, dtype=float)
    norms = np.linalg.norm(X, axis=1)
    if (norms == 0).any():
        raise DataError("cosine similarity undefined for zero feature vector "
                        f"(record {int(np.flatnonzero(norms == 0)[0])})")
    adj = []
    for start in range(0, len(X), chunk):
        sim = 1.0 - cdist(X[start:start + chunk], X, "cosine")
        for r, row in enumerate(sim >= threshold):
            row[start + r] = False
            adj.append(np.flatnonzero(row))
    return adj


def greedy_mis(adjacency, order) -> np.ndarray:
    """Visit vertices in ``order``, keeping each one with no kept neighbour."""
    blocked = np.zeros(len(adjacency), dtype=bool)
    chosen = []
    for v in order:
        if not blocked[v]:
            chosen.append(v)
            blocked[v] = True
            blocked[adjacency[v]] = True
    return np.sort(np.array(chosen, dtype=int))


def mis_select_suites(corpus: Corpus, similarity_threshold: float, run_count: int,
                      seed: int = 0) -> list[np.ndarray]:
    """Greedy maximal independent sets on the cosine-similarity graph of instances.

    Instances are joined when their feature cosine similarity reaches
    ``similarity_threshold``. Run ``r`` visits vertices in a random order drawn
    from ``SeedSequence(seed, spawn_key=(r,))``; each run yields one suite as
    sorted record indices.
    """
    if not 0 < similarity_threshold < 1:
        raise DataError("similarity threshold must lie in (0, 1)")
    if run_count < 1:
        raise DataError("run_count must be positive")
    adj = _neighbors(corpus.features, similarity_threshold)
    runs = []
    for r in range(run_count):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
        runs.append(greedy_mis(adj, rng.permutation(len(corpus))))
    return runs


def suites_from_selection(corpus: Corpus, selections, prefix: str = "BS") -> Corpus:
    """One suite per selection; instance ids become ``<suite>:<instance_id>``."""
    suites, ids, rows = [], [], []
    labels = [f"{prefix}{r + 1}" for r in range(len(selections))]
    for label, sel in zip(labels, selections):
        for i in sel:
            suites.append(label)
            ids.append(f"{corpus.suites[i]}:{corpus.instance_ids[i]}")
            rows.append(i)
    return Corpus(suites, ids, corpus.features[rows], corpus.feature_names, labels)


def _cluster_members(n_records, model, cluster_index):
    labels = np.asarray(model.assignments)
    if len(labels) != n_records:
        raise DataError("clustering model does not match the corpus")
    if not 0 <= cluster_index < model.k:
        raise DataError(f"cluster index {cluster_index} outside [0, {model.k})")
    members = np.flatnonzero(labels == cluster_index)
    if len(members) == 0:
        raise DataError(f"cluster {cluster_index} is empty")
    return members


def single_cluster_suite(corpus: Corpus, model: ClusteringModel, cluster_index: int,
                         label: str) -> Corpus:
    """Append a suite holding every instance of one cluster, whatever its suite.

    The new suite's instance ids are ``<original suite>:<instance_id>``.
    """
    if label in corpus.suite_ids:
        raise DataError(f"suite {label!r} already exists")
    members = _cluster_members(len(corpus), model, cluster_index)
    ids = [f"{corpus.suites[i]}:{corpus.instance_ids[i]}" for i in members]
    return Corpus(list(corpus.suites) + [label] * len(members),
                  list(corpus.instance_ids) + ids,
                  np.vstack([corpus.features, corpus.features[members]]),
                  corpus.feature_names, corpus.suite_ids + (label,))


def single_cluster_labeled(labeled: LabeledCorpus, model: ClusteringModel, cluster_index: int,
                           label: str) -> LabeledCorpus:
    members = _cluster_members(len(labeled), model, cluster_index)
    corpus = single_cluster_suite(labeled.corpus, model, cluster_index, label)
    targets = np.concatenate([labeled.targets, labeled.targets[members]])
    return LabeledCorpus(corpus, targets, labeled.algorithm, labeled.target_transform)


def spearman(x, y) -> float | None:
    """Spearman correlation with average ranks; None if either input is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise DataError("spearman needs two equal-length vectors of length >= 2")
    if np.all(x == x[0]) or np.all(y == y[0]):
        return None
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx @ ry) / np.sqrt((rx @ rx) * (ry @ ry)))


@dataclass(frozen=True)
class SuiteVerdict:
    train_suite: str
    test_suites: tuple
    similarity: tuple
    mdae: tuple
    rank_correlation: float | None
    verdict: str


@dataclass(frozen=True)
class Report:
    records: tuple
    summary: float | None  # median of defined correlations

    def to_dict(self) -> dict:
        return {
            "records": [
                {
                    "train_suite": r.train_suite,
                    "test_suites": list(r.test_suites),
                    "similarity": list(r.similarity),
                    "mdae": list(r.mdae),
                    "rank_correlation": r.rank_correlation,
                    "verdict": r.verdict,
                }
                for r in self.records
            ],
            "summary": {"median_rank_correlation": self.summary},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def verdicts(self) -> dict:
        return {r.train_suite: r.verdict for r in self.records}


def generalizability_report(sim: SimilarityMatrix, evaluation: EvaluationMatrix) -> Report:
    """Per train suite, rank-correlate similarity with cross-suite MDAE.

    A negative correlation (more similar suites get smaller errors) is
    ``consistent``; constant rows give ``insufficient-variation``.
    """
    suites = list(evaluation.train_suites)
    if set(suites) != set(sim.suite_ids) or set(evaluation.test_suites) != set(suites):
        raise DataError("similarity and evaluation matrices cover different suites")
    if len(suites) < 3:
        raise DataError("correlation needs at least 2 test suites")
    records, defined = [], []
    for s in suites:
        others = [t for t in suites if t != s]
        i = sim.suite_ids.index(s)
        srow = [float(sim.values[i, sim.suite_ids.index(t)]) for t in others]
        erow = [evaluation.cell(s, t) for t in others]
        rho = spearman(srow, erow)
        if rho is None:
            verdict = INSUFFICIENT
        else:
            verdict = CONSISTENT if rho < 0 else VIOLATED
            defined.append(rho)
        records.append(SuiteVerdict(s, tuple(others), tuple(srow), tuple(erow), rho, verdict))
    summary = float(np.median(defined)) if defined else None
    return Report(tuple(records), summary)
