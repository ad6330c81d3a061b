"""Command-line entry point: ``suitesim <subcommand> ...``.

Exit codes: 0 success, 2 input/validation error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import pipeline
from .analysis import (SyntheticSpec, generalizability_report, mis_select_suites, sample_synthetic,
                       suites_from_selection)
from .data import load_feature_table, normalize_features
from .errors import DataError, InvariantError
from .io import (features_csv, load_coverage_csv, load_mdae_csv, load_similarity_csv, performance_csv,
                 staged)

log = logging.getLogger("suitesim")


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _add_common(p, features=True):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, dest="n_jobs", help="worker threads (results do not depend on it)")
    if features:
        p.add_argument("--features", help="features.csv: suite,instance_id,<feature>...")
        p.add_argument("--no-normalize", dest="normalize", action="store_false", default=None)
        p.add_argument("--normalization", choices=["zscore", "minmax"])


def _add_k(p):
    p.add_argument("--k", type=int, dest="fixed_k", help="fixed number of clusters")
    p.add_argument("--k-min", type=int)
    p.add_argument("--k-max", type=int)
    p.add_argument("--method", dest="k_method", choices=["silhouette", "elbow-distortion"])


def _add_perf(p, algorithm=True):
    p.add_argument("--performance", help="performance.csv: suite,instance_id,algorithm,precision")
    if algorithm:
        p.add_argument("--algorithm")
    p.add_argument("--transform", dest="target_transform", choices=["raw", "log10-floored"])
    p.add_argument("--trees", type=int, dest="tree_count")
    p.add_argument("--no-bootstrap", dest="bootstrap", action="store_false", default=None)
    p.add_argument("--max-features", type=float, dest="split_candidate_fraction")
    p.add_argument("--min-samples-split", type=int)
    p.add_argument("--min-samples-leaf", type=int)
    p.add_argument("--max-depth", type=int)


CONFIG_KEYS = ("features", "performance", "algorithm", "target_transform", "normalize", "normalization",
               "k_method", "k_min", "k_max", "fixed_k", "seed", "out", "n_jobs")


def _config(args) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig.from_json(args.config) if args.config else pipeline.PipelineConfig()
    ns = vars(args)
    forest = {k: ns[k] for k in pipeline.FOREST_KEYS if ns.get(k) is not None}
    # a k flag replaces whichever k mode the config file chose
    if ns.get("fixed_k") is not None:
        cfg = dataclasses.replace(cfg, k_min=None, k_max=None)
    elif ns.get("k_min") is not None or ns.get("k_max") is not None:
        cfg = dataclasses.replace(cfg, fixed_k=None)
    return cfg.updated(forest=forest, **{k: ns.get(k) for k in CONFIG_KEYS})


def cmd_similarity(args):
    cfg = _config(args)
    coverage = load_coverage_csv(args.coverage) if args.coverage else None
    return pipeline.run_similarity_only(cfg, coverage)


def cmd_evaluate(args):
    return pipeline.run_evaluate(_config(args))


def cmd_report(args):
    report = generalizability_report(load_similarity_csv(args.similarity), load_mdae_csv(args.mdae))
    with staged(args.out) as writer:
        writer.write("report.json", report.to_json())
    return report.to_dict()["summary"]


def cmd_pipeline(args):
    return pipeline.run_pipeline(_config(args))


def _bundled(name):
    return resources.files("suitesim") / "fixtures" / name


def cmd_synth(args):
    if args.spec:
        try:
            spec_dict = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"{args.spec}: cannot read spec ({exc})") from None
    else:
        spec_dict = json.loads(_bundled("synthetic_spec.json").read_text(encoding="utf-8"))
    if args.seed is not None:
        spec_dict["seed"] = args.seed
    labeled, _ = sample_synthetic(SyntheticSpec.from_dict(spec_dict))
    # precision = 10**target, so a log10-floored transform recovers the target
    precision = 10.0 ** labeled.targets
    with staged(args.out) as writer:
        writer.write("features.csv", features_csv(labeled.corpus))
        writer.write("performance.csv", performance_csv(labeled, precision))
    return {"records": len(labeled), "suites": list(labeled.corpus.suite_ids)}


def cmd_mis_select(args):
    corpus = load_feature_table(args.features)
    graph_corpus = normalize_features(corpus)[0] if args.normalize else corpus
    runs = mis_select_suites(graph_corpus, args.threshold, args.runs, args.seed)
    selected = suites_from_selection(corpus, runs, args.prefix)
    with staged(args.out) as writer:
        writer.write("features.csv", features_csv(selected))
        if args.performance:
            writer.write("performance.csv", _remap_performance(args.performance, selected))
    return {"suite_sizes": {s: int(selected.suite_mask(s).sum()) for s in selected.suite_ids}}


def _remap_performance(path, selected):
    from .data import _read_csv
    header, body = _read_csv(path)
    by_key = {}
    for _, row in body:
        by_key.setdefault(f"{row[0].strip()}:{row[1].strip()}", []).append(row)
    lines = [",".join(header)]
    for suite, inst in selected.keys:
        for row in by_key.get(inst, []):
            lines.append(",".join([suite, inst, row[2].strip(), row[3].strip()]))
    return "\n".join(lines) + "\n"


def cmd_single_cluster(args):
    cfg = _config(args)
    algorithms = args.algorithms.split(",") if args.algorithms else None
    return pipeline.run_single_cluster(cfg, args.cluster_index, args.label, algorithms)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="suitesim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("similarity", help="cluster instances and compare suites by coverage")
    _add_common(p)
    _add_k(p)
    p.add_argument("--coverage", help="precomputed coverage.csv; bypasses clustering")
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("evaluate", help="cross-suite random-forest MDAE matrix")
    _add_common(p)
    _add_perf(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="rank-correlate similarity with MDAE")
    p.add_argument("--similarity", required=True)
    p.add_argument("--mdae", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="write a synthetic features/performance fixture")
    p.add_argument("--spec", help="synthetic spec JSON (default: bundled spec)")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mis-select", help="select suites as greedy maximal independent sets")
    p.add_argument("--features", required=True)
    p.add_argument("--performance", help="also remap this performance table onto the new suites")
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--prefix", default="BS")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mis_select)

    p = sub.add_parser("single-cluster", help="train on one cluster as a new suite (bs6_eval.csv)")
    _add_common(p)
    _add_k(p)
    _add_perf(p, algorithm=False)
    p.add_argument("--cluster-index", type=int, required=True)
    p.add_argument("--label", default="BS6")
    p.add_argument("--algorithms", help="comma-separated; default: every algorithm in the table")
    p.set_defaults(func=cmd_single_cluster)

    p = sub.add_parser("pipeline", help="run every stage and write a manifest")
    _add_common(p)
    _add_k(p)
    _add_perf(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        result = args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    if result is not None:
        log.info("%s", json.dumps(result, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
