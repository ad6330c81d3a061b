"""End-to-end workflow: features -> clusters -> coverage -> similarity -> MDAE -> report."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import generalizability_report, single_cluster_labeled
from .clustering import METHODS, ClusteringModel, KSelectionReport, default_k_range, kmeans_fit, select_k
from .coverage import CoverageMatrix, agglomerate, coverage_matrix, leaf_order, similarity_matrix
from .data import (NORMALIZATIONS, TRANSFORMS, Corpus, join_targets, list_algorithms, load_feature_table,
                   load_performance_table, normalize_features)
from .errors import DataError
from .figures import dendrogram_svg, heatmap_svg
from .forest import ForestConfig, cross_suite_evaluate, fit_suite_forest, mdae, predict
from .io import (ArtifactWriter, coverage_csv, kselection_csv, mdae_csv, sha256, similarity_csv, staged,
                 table_csv)

FOREST_KEYS = ("tree_count", "bootstrap", "split_candidate_fraction", "min_samples_split",
               "min_samples_leaf", "max_depth")


@dataclass
class PipelineConfig:
    features: str | None = None
    performance: str | None = None
    algorithm: str | None = None
    target_transform: str = "raw"
    normalize: bool = True
    normalization: str = "zscore"
    k_method: str = "silhouette"
    k_min: int | None = None
    k_max: int | None = None
    fixed_k: int | None = None
    forest: dict = field(default_factory=dict)
    seed: int | None = None
    out: str | None = None
    n_jobs: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise DataError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise DataError(f"{path}: file not found") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise DataError(f"{path}: config must be a JSON object")
        # input paths are relative to the config file
        for key in ("features", "performance"):
            if d.get(key) and not Path(d[key]).is_absolute():
                d[key] = str(Path(path).parent / d[key])
        return cls.from_dict(d)

    def updated(self, **overrides) -> "PipelineConfig":
        forest = dict(self.forest)
        forest.update(overrides.pop("forest", None) or {})
        return dataclasses.replace(self, forest=forest,
                                   **{k: v for k, v in overrides.items() if v is not None})

    def validate(self, need_performance: bool = False) -> None:
        if self.seed is None:
            raise DataError("a seed is required")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DataError("seed must be a 64-bit unsigned integer")
        if self.fixed_k is not None and (self.k_min is not None or self.k_max is not None):
            raise DataError("fixed_k and k_min/k_max are mutually exclusive")
        if self.fixed_k is not None and self.fixed_k < 2:
            raise DataError("k must be ≥ 2")
        if self.k_method not in METHODS:
            raise DataError(f"k_method must be one of {METHODS}")
        if self.target_transform not in TRANSFORMS:
            raise DataError(f"target_transform must be one of {TRANSFORMS}")
        if self.normalization not in NORMALIZATIONS:
            raise DataError(f"normalization must be one of {NORMALIZATIONS}")
        unknown = set(self.forest) - set(FOREST_KEYS)
        if unknown:
            raise DataError(f"unknown forest options {sorted(unknown)}")
        if not self.out:
            raise DataError("an output directory is required")
        if need_performance and not (self.features and self.performance and self.algorithm):
            raise DataError("features, performance and algorithm are required")

    def forest_config(self) -> ForestConfig:
        return ForestConfig(**self.forest, seed=int(self.seed), n_jobs=self.n_jobs)

    def record(self) -> dict:
        """Config as recorded in the manifest (no output path or thread count)."""
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("n_jobs")
        d["forest"] = self.forest_config().to_dict()
        return d


@dataclass
class Clustered:
    corpus: Corpus  # features as clustered (normalized when enabled)
    model: ClusteringModel
    kselection: KSelectionReport | None
    normalization: dict | None


def prepare_corpus(cfg: PipelineConfig) -> tuple[Corpus, dict | None]:
    corpus = load_feature_table(cfg.features)
    if len(corpus.suite_ids) < 2:
        raise DataError(f"{cfg.features}: need at least 2 suites")
    if not cfg.normalize:
        return corpus, None
    corpus, params = normalize_features(corpus, cfg.normalization)
    return corpus, params.to_dict()


def cluster(cfg: PipelineConfig, corpus: Corpus, normalization=None) -> Clustered:
    seed = int(cfg.seed)
    if cfg.fixed_k is not None:
        model = kmeans_fit(corpus.features, cfg.fixed_k, seed, n_jobs=cfg.n_jobs)
        return Clustered(corpus, model, None, normalization)
    lo, hi = default_k_range(len(corpus))
    k_min = cfg.k_min if cfg.k_min is not None else lo
    k_max = cfg.k_max if cfg.k_max is not None else hi
    model, report = select_k(corpus.features, k_min, k_max, cfg.k_method, seed, n_jobs=cfg.n_jobs)
    return Clustered(corpus, model, report, normalization)


def write_similarity(writer: ArtifactWriter, cov: CoverageMatrix):
    sim = similarity_matrix(cov)
    dendro = agglomerate(sim)
    writer.write("coverage.csv", coverage_csv(cov))
    writer.write("similarity.csv", similarity_csv(sim))
    writer.write("similarity.svg", heatmap_svg(sim, leaf_order(dendro)))
    writer.write("dendrogram.svg", dendrogram_svg(dendro))
    return sim, dendro


def _cluster_stage(writer, cfg, corpus, normalization):
    clustered = cluster(cfg, corpus, normalization)
    cov = coverage_matrix(corpus.suites, clustered.model.assignments, clustered.model.k, corpus.suite_ids)
    sim, dendro = write_similarity(writer, cov)
    if clustered.kselection is not None:
        writer.write("kselection.csv", kselection_csv(clustered.kselection))
    writer.write("clusters.json", clustered.model.to_json() + "\n")
    return clustered, cov, sim, dendro


def run_similarity_only(cfg: PipelineConfig, coverage: CoverageMatrix | None = None) -> dict:
    """Feature-space half of the workflow; ``coverage`` bypasses clustering."""
    if coverage is not None:
        if cfg.seed is None:
            cfg = cfg.updated(seed=0)
        cfg.validate()
        if len(coverage.suite_ids) < 2:
            raise DataError("need at least 2 suites")
        with staged(cfg.out) as writer:
            write_similarity(writer, coverage)
        return {"artifacts": sorted(writer.names), "chosen_k": coverage.k}
    cfg.validate()
    if not cfg.features:
        raise DataError("a features path (or a coverage matrix) is required")
    corpus, normalization = prepare_corpus(cfg)
    with staged(cfg.out) as writer:
        clustered, *_ = _cluster_stage(writer, cfg, corpus, normalization)
    return {"artifacts": sorted(writer.names), "chosen_k": clustered.model.k}


def load_labeled(cfg: PipelineConfig, corpus: Corpus, algorithm: str | None = None):
    perf = load_performance_table(cfg.performance, algorithm or cfg.algorithm)
    return join_targets(corpus, perf, cfg.target_transform)


def run_evaluate(cfg: PipelineConfig) -> dict:
    cfg.validate(need_performance=True)
    corpus, _ = prepare_corpus(cfg)
    labeled = load_labeled(cfg, corpus)
    ev = cross_suite_evaluate(labeled, cfg.forest_config())
    with staged(cfg.out) as writer:
        writer.write("mdae.csv", mdae_csv(ev))
    return {"artifacts": sorted(writer.names), "unmatched_records": labeled.unmatched}


def _input_record(path):
    return {"path": str(path), "sha256": sha256(path)} if path else None


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage and write the artifacts plus ``manifest.json``."""
    cfg.validate(need_performance=True)
    corpus, normalization = prepare_corpus(cfg)
    labeled = load_labeled(cfg, corpus)
    with staged(cfg.out) as writer:
        clustered, cov, sim, dendro = _cluster_stage(writer, cfg, corpus, normalization)
        ev = cross_suite_evaluate(labeled, cfg.forest_config())
        writer.write("mdae.csv", mdae_csv(ev))
        if set(ev.train_suites) != set(sim.suite_ids):
            raise DataError("some suites have no performance entries; "
                            f"evaluated {list(ev.train_suites)} of {list(sim.suite_ids)}")
        report = generalizability_report(sim, ev)
        writer.write("report.json", report.to_json())
        manifest = {
            "tool": {"name": "suitesim", "version": __version__},
            "inputs": {"features": _input_record(cfg.features),
                       "performance": _input_record(cfg.performance)},
            "config": cfg.record(),
            "seed": int(cfg.seed),
            "chosen_k": clustered.model.k,
            "k_selection": None if clustered.kselection is None else clustered.kselection.method,
            "normalization": normalization,
            "unmatched_records": labeled.unmatched,
            "leaf_order": leaf_order(dendro),
            "artifacts": writer.hashes(),
        }
        writer.write("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def run_single_cluster(cfg: PipelineConfig, cluster_index: int, label: str,
                       algorithms: list[str] | None = None) -> dict:
    """Train on one cluster's instances as a new suite, test on every original suite.

    Writes a table of algorithms x test suites (``bs6_eval.csv``).
    """
    cfg.validate()
    if not (cfg.features and cfg.performance):
        raise DataError("features and performance are required")
    corpus, normalization = prepare_corpus(cfg)
    algorithms = algorithms or list_algorithms(cfg.performance)
    fc = cfg.forest_config()
    with staged(cfg.out) as writer:
        clustered = cluster(cfg, corpus, normalization)
        writer.write("clusters.json", clustered.model.to_json() + "\n")
        rows = {}
        for algo in algorithms:
            labeled = load_labeled(cfg, corpus, algo)
            # the cluster model indexes the full corpus; keep only records with targets
            keep = {k: i for i, k in enumerate(corpus.keys)}
            idx = np.array([keep[k] for k in labeled.corpus.keys])
            sub_model = dataclasses.replace(clustered.model, assignments=clustered.model.assignments[idx])
            extended = single_cluster_labeled(labeled, sub_model, cluster_index, label)
            model = fit_suite_forest(extended, label, fc)
            rows[algo] = []
            for suite in corpus.suite_ids:
                X, y = labeled.suite(suite)
                if len(y) == 0:
                    raise DataError(f"algorithm {algo!r} has no entries for suite {suite!r}")
                rows[algo].append(mdae(predict(model, X), y))
        writer.write("bs6_eval.csv", table_csv("algorithm", rows, corpus.suite_ids))
    return {"artifacts": sorted(writer.names), "chosen_k": clustered.model.k}
