"""Feature and performance tables: loading, validation, normalization, joins."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError

PRECISION_FLOOR = 1e-8
TRANSFORMS = ("raw", "log10-floored")
NORMALIZATIONS = ("zscore", "minmax")


class InstanceRecord(NamedTuple):
    suite_id: str
    instance_id: str
    features: np.ndarray


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Corpus:
    """Instances of one or more benchmark suites in a shared feature space.

    Records are stored column-wise: ``suites[i]``, ``instance_ids[i]`` and
    ``features[i]`` describe record ``i``.
    """

    suites: tuple
    instance_ids: tuple
    features: np.ndarray
    feature_names: tuple
    suite_ids: tuple = ()

    def __post_init__(self):
        suites = tuple(str(s) for s in self.suites)
        ids = tuple(str(i) for i in self.instance_ids)
        feats = np.asarray(self.features, dtype=float)
        names = tuple(self.feature_names)
        if feats.ndim != 2:
            raise DataError("features must be a 2-d array")
        if len(suites) == 0:
            raise DataError("corpus has no records")
        if not (len(suites) == len(ids) == feats.shape[0]):
            raise DataError("suites, instance ids and feature rows differ in length")
        if feats.shape[1] != len(names) or len(names) == 0:
            raise DataError(f"expected {len(names)} features per record, got {feats.shape[1]}")
        if len(set(names)) != len(names):
            raise DataError("duplicate feature names")
        if not np.all(np.isfinite(feats)):
            row, col = np.argwhere(~np.isfinite(feats))[0]
            raise DataError(f"non-finite feature value at record {row}, feature {names[col]!r}")
        keys = set()
        for s, i in zip(suites, ids):
            if (s, i) in keys:
                raise DataError(f"duplicate instance key ({s}, {i})")
            keys.add((s, i))
        order = tuple(self.suite_ids) or tuple(dict.fromkeys(suites))
        if len(set(order)) != len(order):
            raise DataError("duplicate suite ids")
        missing = set(suites) - set(order)
        if missing:
            raise DataError(f"records reference unknown suites {sorted(missing)}")
        empty = [s for s in order if s not in set(suites)]
        if empty:
            raise DataError(f"suites without records: {empty}")
        object.__setattr__(self, "suites", suites)
        object.__setattr__(self, "instance_ids", ids)
        object.__setattr__(self, "features", _frozen(feats, float))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "suite_ids", order)

    def __len__(self):
        return len(self.suites)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def records(self) -> list[InstanceRecord]:
        return [InstanceRecord(s, i, f) for s, i, f in zip(self.suites, self.instance_ids, self.features)]

    @property
    def keys(self) -> list[tuple[str, str]]:
        return list(zip(self.suites, self.instance_ids))

    def suite_mask(self, suite_id: str) -> np.ndarray:
        return np.array([s == suite_id for s in self.suites])

    def subset(self, index) -> "Corpus":
        """Records selected by a boolean mask or integer index, in corpus order."""
        idx = np.arange(len(self))[np.asarray(index)]
        suites = [self.suites[i] for i in idx]
        kept = tuple(s for s in self.suite_ids if s in set(suites))
        return Corpus(suites, [self.instance_ids[i] for i in idx], self.features[idx],
                      self.feature_names, kept)

    def with_features(self, features, feature_names) -> "Corpus":
        return Corpus(self.suites, self.instance_ids, features, feature_names, self.suite_ids)


@dataclass(frozen=True)
class PerformanceTable:
    algorithm: str
    entries: dict = field(default_factory=dict)  # (suite, instance_id) -> precision

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    feature_names: tuple  # retained features, in corpus order
    location: np.ndarray
    scale: np.ndarray
    dropped_features: tuple = ()
    method: str = "zscore"

    def apply(self, corpus: Corpus) -> Corpus:
        cols = _columns(corpus, self.feature_names)
        return corpus.with_features((corpus.features[:, cols] - self.location) / self.scale,
                                    self.feature_names)

    def inverse(self, features) -> np.ndarray:
        return np.asarray(features, dtype=float) * self.scale + self.location

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "feature_names": list(self.feature_names),
            "location": [float(v) for v in self.location],
            "scale": [float(v) for v in self.scale],
            "dropped_features": list(self.dropped_features),
        }


@dataclass(frozen=True, eq=False)
class LabeledCorpus:
    corpus: Corpus
    targets: np.ndarray
    algorithm: str
    target_transform: str = "raw"
    unmatched: int = 0

    def __post_init__(self):
        t = _frozen(self.targets, float)
        if t.shape != (len(self.corpus),):
            raise DataError("exactly one target per corpus record is required")
        if not np.all(np.isfinite(t)):
            raise DataError("targets must be finite")
        object.__setattr__(self, "targets", t)

    def __len__(self):
        return len(self.corpus)

    def suite(self, suite_id: str) -> tuple[np.ndarray, np.ndarray]:
        """Feature matrix and targets of one suite."""
        mask = self.corpus.suite_mask(suite_id)
        return self.corpus.features[mask], self.targets[mask]

    def subset(self, index) -> "LabeledCorpus":
        idx = np.arange(len(self))[np.asarray(index)]
        return LabeledCorpus(self.corpus.subset(idx), self.targets[idx], self.algorithm,
                             self.target_transform)


def _columns(corpus: Corpus, names) -> list[int]:
    pos = {n: j for j, n in enumerate(corpus.feature_names)}
    missing = [n for n in names if n not in pos]
    if missing:
        raise DataError(f"corpus lacks features {missing}")
    return [pos[n] for n in names]


def _read_csv(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(n, row) for n, row in enumerate(csv.reader(fh), start=1) if row]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0][1]]
    if len(set(header)) != len(header):
        dup = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"{path}: duplicate header columns {dup}")
    body = rows[1:]
    for lineno, row in body:
        if len(row) != len(header):
            raise DataError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
    return header, body


def _parse_float(text, path, lineno, column) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{path}: row {lineno}, column {column!r}: non-numeric value {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{path}: row {lineno}, column {column!r}: non-finite value {text!r}")
    return value


def load_feature_table(path) -> Corpus:
    """Read ``suite,instance_id,<feature>...`` rows into a :class:`Corpus`."""
    header, body = _read_csv(path)
    if header[:2] != ["suite", "instance_id"]:
        raise DataError(f"{path}: header must start with 'suite,instance_id'")
    names = header[2:]
    if not names:
        raise DataError(f"{path}: no feature columns")
    if not body:
        raise DataError(f"{path}: no data rows")
    suites, ids, feats, seen = [], [], [], set()
    for lineno, row in body:
        key = (row[0].strip(), row[1].strip())
        if key in seen:
            raise DataError(f"{path}: row {lineno}: duplicate instance key {key}")
        seen.add(key)
        suites.append(key[0])
        ids.append(key[1])
        feats.append([_parse_float(v, path, lineno, c) for v, c in zip(row[2:], names)])
    return Corpus(suites, ids, np.array(feats, dtype=float), names)


def load_performance_table(path, algorithm: str) -> PerformanceTable:
    """Read ``suite,instance_id,algorithm,precision`` rows for one algorithm."""
    header, body = _read_csv(path)
    expected = ["suite", "instance_id", "algorithm", "precision"]
    if header != expected:
        raise DataError(f"{path}: header must be {','.join(expected)}")
    entries = {}
    for lineno, row in body:
        suite, inst, algo = (v.strip() for v in row[:3])
        value = _parse_float(row[3], path, lineno, "precision")
        if value < 0:
            raise DataError(f"{path}: row {lineno}: negative precision {value}")
        if algo != algorithm:
            continue
        if (suite, inst) in entries:
            raise DataError(f"{path}: row {lineno}: duplicate entry for ({suite}, {inst}, {algo})")
        entries[(suite, inst)] = value
    if not entries:
        raise DataError(f"{path}: no entries for algorithm {algorithm!r}")
    return PerformanceTable(algorithm, entries)


def list_algorithms(path) -> list[str]:
    _, body = _read_csv(path)
    return list(dict.fromkeys(row[2].strip() for _, row in body))


def normalize_features(corpus: Corpus, method: str = "zscore",
                       fit_suites: Sequence[str] | None = None) -> tuple[Corpus, NormalizationParams]:
    """Standardize every feature column; constant columns are dropped.

    Parameters are fitted over ``fit_suites`` (default: the whole corpus) and
    applied to every record. z-score uses the population standard deviation.
    """
    if method not in NORMALIZATIONS:
        raise DataError(f"unknown normalization {method!r}")
    if fit_suites is None:
        ref = corpus.features
    else:
        unknown = set(fit_suites) - set(corpus.suite_ids)
        if unknown:
            raise DataError(f"unknown suites {sorted(unknown)}")
        ref = corpus.features[np.isin(corpus.suites, list(fit_suites))]
    if method == "zscore":
        loc = ref.mean(axis=0)
        scale = ref.std(axis=0)
    else:
        loc = ref.min(axis=0)
        scale = ref.max(axis=0) - loc
    keep = scale > 0
    if not keep.any():
        raise DataError("no informative features: every feature is constant")
    names = tuple(n for n, k in zip(corpus.feature_names, keep) if k)
    dropped = tuple(n for n, k in zip(corpus.feature_names, keep) if not k)
    params = NormalizationParams(names, _frozen(loc[keep]), _frozen(scale[keep]), dropped, method)
    return params.apply(corpus), params


def transform_precision(precision, transform: str = "raw") -> np.ndarray:
    p = np.asarray(precision, dtype=float)
    if transform == "raw":
        return p
    if transform == "log10-floored":
        return np.log10(np.maximum(p, PRECISION_FLOOR))
    raise DataError(f"unknown target transform {transform!r}")


def join_targets(corpus: Corpus, perf: PerformanceTable, transform: str = "raw") -> LabeledCorpus:
    """Attach one performance target per record; records without one are dropped."""
    if transform not in TRANSFORMS:
        raise DataError(f"unknown target transform {transform!r}")
    matched = [i for i, key in enumerate(corpus.keys) if key in perf.entries]
    if not matched:
        raise DataError("disjoint keys: no feature record has a performance entry")
    keys = corpus.keys
    precision = [perf.entries[keys[i]] for i in matched]
    sub = corpus.subset(np.array(matched))
    return LabeledCorpus(sub, transform_precision(precision, transform), perf.algorithm,
                         transform, unmatched=len(corpus) - len(matched))
