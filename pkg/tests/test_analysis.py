import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from conftest import blobs
from suitesim.analysis import (CONSISTENT, INSUFFICIENT, SyntheticSpec, generalizability_report,
                               mis_select_suites, sample_synthetic, single_cluster_labeled,
                               single_cluster_suite, spearman, suites_from_selection, synth_corpus)
from suitesim.clustering import ClusteringModel, kmeans_fit, select_k
from suitesim.coverage import SimilarityMatrix, coverage_matrix, similarity_matrix
from suitesim.data import Corpus, normalize_features
from suitesim.errors import DataError
from suitesim.forest import EvaluationMatrix, ForestConfig, cross_suite_evaluate


def corpus_of(X, suites=None):
    X = np.asarray(X, dtype=float)
    n = len(X)
    return Corpus(suites or ["U"] * n, [f"i{j}" for j in range(n)], X, [f"f{j}" for j in range(X.shape[1])])


def test_synth_matched_suites_cover_both_clusters():
    spec = SyntheticSpec([[0, 0], [30, 30]], 1.0, [("A", [0.5, 0.5], 100), ("B", [0.5, 0.5], 100)],
                         [([0, 0], 0), ([0, 0], 0)], seed=0)
    labeled = synth_corpus(spec)
    model = kmeans_fit(labeled.corpus.features, 2, seed=0)
    cov = coverage_matrix(labeled.corpus.suites, model.assignments, 2, labeled.corpus.suite_ids)
    assert np.abs(cov.rows - 0.5).max() <= 0.15


def test_synth_single_weight_suite():
    spec = SyntheticSpec([[0, 0], [30, 30]], 1.0, [("A", [1, 0], 50)], [([0, 0], 0), ([0, 0], 0)], seed=1)
    labeled, planted = sample_synthetic(spec)
    assert (planted == 0).all()
    assert np.linalg.norm(labeled.corpus.features, axis=1).max() < 6
    cov = coverage_matrix(labeled.corpus.suites, planted, 2)
    assert cov.rows.tolist() == [[1.0, 0.0]]


def test_synth_noise_free_targets_are_affine():
    spec = SyntheticSpec([[0, 0, 0], [9, 9, 9]], 1.0, [("A", [0.4, 0.6], 80)],
                         [([1, -2, 0.5], 3.0), ([0, 1, 1], -1.0)], noise_scale=0.0, seed=2)
    labeled, planted = sample_synthetic(spec)
    X, y = labeled.corpus.features, labeled.targets
    for c, (w, b) in enumerate(spec.target_rules):
        m = planted == c
        assert np.allclose(y[m], X[m] @ np.array(w) + b, atol=1e-12)


def test_synth_deterministic_per_seed():
    spec = SyntheticSpec([[0, 0], [5, 5]], 1.0, [("A", [0.5, 0.5], 30)], [([1, 0], 0), ([0, 1], 0)], 0.3, seed=4)
    a, b = synth_corpus(spec), synth_corpus(spec)
    assert np.array_equal(a.corpus.features, b.corpus.features) and np.array_equal(a.targets, b.targets)


@pytest.mark.parametrize("kwargs", [
    dict(cluster_centers=[]),
    dict(suites=[]),
    dict(suites=[("A", [0.7, 0.7], 10)]),
    dict(suites=[("A", [1, 0], 0)]),
    dict(target_rules=[([0, 0], 0)]),
    dict(cluster_spread=0.0),
])
def test_synth_invalid_spec(kwargs):
    base = dict(cluster_centers=[[0, 0], [5, 5]], cluster_spread=1.0, suites=[("A", [0.5, 0.5], 10)],
                target_rules=[([0, 0], 0), ([0, 0], 0)])
    base.update(kwargs)
    with pytest.raises(DataError):
        sample_synthetic(SyntheticSpec(**base))


def test_spec_from_dict():
    spec = SyntheticSpec.from_dict({
        "cluster_centers": [[0, 0]], "cluster_spread": 2,
        "suites": [{"label": "S", "weights": [1], "count": 3}],
        "target_rules": [{"weights": [1, 1], "offset": 0}], "seed": 9,
    })
    assert spec.seed == 9 and spec.suites == [("S", [1.0], 3)] and spec.noise_scale == 0.0


def pairwise_cosine(X):
    U = X / np.linalg.norm(X, axis=1, keepdims=True)
    return U @ U.T


def test_mis_no_edges_selects_all():
    X = np.eye(6)  # orthogonal vectors: every cosine is 0
    for run in mis_select_suites(corpus_of(X), 0.5, 3, seed=0):
        assert run.tolist() == list(range(6))


def test_mis_complete_graph_selects_one():
    X = np.tile([1.0, 2.0, 3.0], (20, 1))
    runs = mis_select_suites(corpus_of(X), 0.9, 4, seed=1)
    assert [len(r) for r in runs] == [1] * 4


def test_mis_independent_and_maximal():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(300, 3))
    cos = pairwise_cosine(X)
    edge = cos >= 0.9
    np.fill_diagonal(edge, False)
    for run in mis_select_suites(corpus_of(X), 0.9, 5, seed=3):
        assert not edge[np.ix_(run, run)].any()
        outside = np.setdiff1d(np.arange(len(X)), run)
        # maximal: every excluded vertex has a neighbour in the set
        assert edge[np.ix_(outside, run)].any(axis=1).all()


def test_mis_runs_differ_and_reproduce():
    X = np.random.default_rng(1).normal(size=(200, 3))
    a = mis_select_suites(corpus_of(X), 0.9, 3, seed=5)
    b = mis_select_suites(corpus_of(X), 0.9, 3, seed=5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], a[1])


def test_mis_errors():
    c = corpus_of(np.eye(3))
    for thr in (0.0, 1.0):
        with pytest.raises(DataError, match="threshold"):
            mis_select_suites(c, thr, 1)
    with pytest.raises(DataError, match="zero feature vector"):
        mis_select_suites(corpus_of([[0.0, 0.0], [1.0, 0.0]]), 0.5, 1)


def test_mis_suites_on_uniform_data_share_coverage():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(500, 5))
    source = corpus_of(X)
    selected = suites_from_selection(source, mis_select_suites(source, 0.9, 5, seed=0))
    assert selected.suite_ids == ("BS1", "BS2", "BS3", "BS4", "BS5")
    assert all(i.startswith("U:") for i in selected.instance_ids)
    model, _ = select_k(selected.features, 2, 8, "silhouette", seed=0)
    cov = coverage_matrix(selected.suites, model.assignments, model.k, selected.suite_ids)
    sim = similarity_matrix(cov).values
    assert sim[~np.eye(5, dtype=bool)].min() > 0.9


def test_single_cluster_whole_corpus():
    c = corpus_of(np.arange(8.0).reshape(4, 2), ["A", "A", "B", "B"])
    model = ClusteringModel(2, np.zeros((2, 2)), np.zeros(4, dtype=int), 0.0, 0)
    out = single_cluster_suite(c, model, 0, "BS6")
    assert out.suite_ids == ("A", "B", "BS6")
    assert np.array_equal(out.features[out.suite_mask("BS6")], c.features)
    assert out.instance_ids[4:] == ("A:i0", "A:i1", "B:i2", "B:i3")
    assert np.array_equal(out.features[:4], c.features)


def test_single_cluster_matches_planted_blob():
    X, truth = blobs([[0, 0], [20, 0], [0, 20]], 30, 1.0, seed=3)
    suites = ["S1", "S2"] * 45
    c = corpus_of(X, suites)
    model = kmeans_fit(X, 3, seed=0)
    idx = int(model.assignments[truth == 1][0])
    out = single_cluster_suite(c, model, idx, "BS6")
    new = out.features[out.suite_mask("BS6")]
    assert sorted(map(tuple, new)) == sorted(map(tuple, X[truth == 1]))
    labels = np.concatenate([model.assignments, model.assignments[truth == 1]])
    cov = coverage_matrix(out.suites, labels, 3, out.suite_ids)
    indicator = np.zeros(3)
    indicator[idx] = 1
    assert cov.row("BS6").tolist() == indicator.tolist()


def test_single_cluster_errors():
    c = corpus_of(np.eye(3))
    model = ClusteringModel(2, np.zeros((2, 3)), np.array([0, 0, 0]), 0.0, 0)
    with pytest.raises(DataError, match="outside"):
        single_cluster_suite(c, model, 2, "X")
    with pytest.raises(DataError, match="empty"):
        single_cluster_suite(c, model, 1, "X")
    with pytest.raises(DataError, match="already exists"):
        single_cluster_suite(c, model, 0, "U")


def test_single_cluster_labeled_copies_targets():
    spec = SyntheticSpec([[0, 0], [20, 20]], 1.0, [("A", [0.5, 0.5], 40)], [([1, 0], 0), ([0, 1], 5)], seed=0)
    labeled, planted = sample_synthetic(spec)
    model = ClusteringModel(2, np.zeros((2, 2)), planted, 0.0, 0)
    out = single_cluster_labeled(labeled, model, 1, "BS6")
    X6, y6 = out.suite("BS6")
    assert np.array_equal(y6, labeled.targets[planted == 1])
    assert np.array_equal(X6, labeled.corpus.features[planted == 1])


def test_spearman_against_scipy():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(2, 12))
        x = rng.integers(0, 4, n).astype(float)  # ties on purpose
        y = rng.normal(size=n)
        if np.all(x == x[0]):
            assert spearman(x, y) is None
            continue
        assert spearman(x, y) == pytest.approx(spearmanr(x, y).statistic, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-100, 100), st.integers(-100, 100)), min_size=3, max_size=12))
def test_spearman_monotone_invariance(pairs):
    # integer grid keeps both transforms strictly increasing in floating point
    x, y = (np.array(v, dtype=float) for v in zip(*pairs))
    rho = spearman(x, y)
    transformed = spearman(np.exp(x / 50.0), y ** 3 + 2 * y)
    if rho is None:
        assert transformed is None
    else:
        assert transformed == pytest.approx(rho, abs=1e-12)


def _report_inputs(sim_values, mdae_values, names=("A", "B", "C", "D")):
    sim = SimilarityMatrix(names, np.asarray(sim_values, dtype=float))
    mdae = np.asarray(mdae_values, dtype=float)
    return sim, EvaluationMatrix(names, names, mdae, np.diag(mdae).copy())


def test_report_perfect_anti_monotone():
    sim = [[1, 0.9, 0.5, 0.1], [0.9, 1, 0.4, 0.2], [0.5, 0.4, 1, 0.3], [0.1, 0.2, 0.3, 1]]
    mdae = [[0.1, 1, 2, 3], [1, 0.1, 3, 2], [1, 2, 0.1, 3], [3, 2, 1, 0.1]]
    report = generalizability_report(*_report_inputs(sim, mdae))
    rec = report.records[0]
    assert rec.train_suite == "A" and rec.test_suites == ("B", "C", "D")
    assert rec.rank_correlation == pytest.approx(-1.0)
    assert rec.verdict == CONSISTENT
    for r in report.records:
        assert (r.verdict == CONSISTENT) == (r.rank_correlation is not None and r.rank_correlation < 0)


def test_report_constant_mdae_insufficient():
    sim = np.array([[1, 0.9, 0.5], [0.9, 1, 0.4], [0.5, 0.4, 1]])
    report = generalizability_report(*_report_inputs(sim, np.full((3, 3), 2.0), ("A", "B", "C")))
    assert set(report.verdicts().values()) == {INSUFFICIENT}
    assert report.summary is None
    assert '"rank_correlation": null' in report.to_json()


def test_report_needs_three_suites():
    with pytest.raises(DataError, match="correlation needs at least 2 test suites"):
        generalizability_report(*_report_inputs(np.eye(2), np.ones((2, 2)), ("A", "B")))


def test_report_label_mismatch():
    sim = SimilarityMatrix(("A", "B", "X"), np.eye(3))
    _, ev = _report_inputs(np.eye(3), np.ones((3, 3)), ("A", "B", "C"))
    with pytest.raises(DataError, match="different suites"):
        generalizability_report(sim, ev)


def test_report_summary_is_median():
    sim = [[1, 0.9, 0.5, 0.1], [0.9, 1, 0.4, 0.2], [0.5, 0.4, 1, 0.3], [0.1, 0.2, 0.3, 1]]
    rng = np.random.default_rng(2)
    mdae = rng.random((4, 4))
    report = generalizability_report(*_report_inputs(sim, mdae))
    rhos = [r.rank_correlation for r in report.records]
    assert report.summary == pytest.approx(float(np.median(rhos)))


def _study(suites, seed=0):
    """Cluster, evaluate and report on a synthetic corpus; returns (similarity, evaluation, report)."""
    centers = [[0, 0, 0], [8, 0, 0], [0, 8, 0], [0, 0, 8]]
    rules = [([0.5, 0, 0], 0.0), ([0, 0.5, 0], 5.0), ([0, 0, -0.5], -3.0), ([2, 2, 2], 10.0)]
    labeled = synth_corpus(SyntheticSpec(centers, 1.0, suites, rules, noise_scale=0.5, seed=seed))
    norm, _ = normalize_features(labeled.corpus)
    model, _ = select_k(norm.features, 2, 8, "silhouette", seed=0)
    sim = similarity_matrix(coverage_matrix(norm.suites, model.assignments, model.k, norm.suite_ids))
    ev = cross_suite_evaluate(labeled, ForestConfig(tree_count=20, seed=0))
    return sim, ev, generalizability_report(sim, ev)


MATCHED = [(f"S{i + 1}", [1 / 3, 1 / 3, 1 / 3, 0], 300) for i in range(5)]


def test_matched_suites_similar_and_comparable_errors():
    sim, ev, _ = _study(MATCHED)
    off = ~np.eye(5, dtype=bool)
    assert sim.values[off].min() > 0.95
    assert ev.mdae[off].max() <= 2 * ev.mdae[off].min()


def test_disjoint_suite_is_consistent():
    # matched suites keep a small share of the disjoint region, so the disjoint row is not constant
    matched = [(f"S{i + 1}", [0.3, 0.3, 0.3, 0.1], 300) for i in range(5)]
    _, _, report = _study(matched + [("D", [0, 0, 0, 1], 300)])
    assert set(report.verdicts().values()) == {CONSISTENT}
    d = next(r for r in report.records if r.train_suite == "D")
    assert d.rank_correlation < 0
