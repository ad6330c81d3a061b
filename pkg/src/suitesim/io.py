"""Text artifact formats and atomic output directories."""

from __future__ import annotations

import contextlib
import csv
import hashlib
import io
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from .clustering import KSelectionReport
from .coverage import CoverageMatrix, SimilarityMatrix
from .data import Corpus, LabeledCorpus, _parse_float, _read_csv
from .errors import DataError
from .forest import EvaluationMatrix

DECIMALS = 6
COVERAGE_SUM_TOL = 0.02  # published tables are rounded to two decimals


def fmt(x: float) -> str:
    """Fixed 6-decimal rendering; exact binary value rounded half-even."""
    s = f"{float(x):.{DECIMALS}f}"
    return "0." + "0" * DECIMALS if s == "-0." + "0" * DECIMALS else s


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def coverage_csv(cov: CoverageMatrix) -> str:
    header = ["suite"] + [f"C{c + 1}" for c in range(cov.k)]
    return _csv_text(header, [[s] + [fmt(v) for v in row] for s, row in zip(cov.suite_ids, cov.rows)])


def load_coverage_csv(path, tol: float = COVERAGE_SUM_TOL) -> CoverageMatrix:
    """Read a ``suite,C1..Ck`` table; rows within ``tol`` of summing to 1 are rescaled."""
    header, body = _read_csv(path)
    if header[0] != "suite" or len(header) < 2:
        raise DataError(f"{path}: header must be suite,C1..Ck")
    if not body:
        raise DataError(f"{path}: no data rows")
    suites, rows = [], []
    for lineno, row in body:
        values = [_parse_float(v, path, lineno, c) for v, c in zip(row[1:], header[1:])]
        if min(values) < 0:
            raise DataError(f"{path}: row {lineno}: negative coverage fraction")
        total = sum(values)
        if abs(total - 1.0) > tol:
            raise DataError(f"{path}: row {lineno}: fractions sum to {total:.4f}, not 1")
        suites.append(row[0].strip())
        rows.append(np.array(values) / total)
    if len(set(suites)) != len(suites):
        raise DataError(f"{path}: duplicate suite rows")
    return CoverageMatrix(tuple(suites), np.array(rows))


def similarity_csv(sim: SimilarityMatrix) -> str:
    return _csv_text(["suite", *sim.suite_ids],
                     [[s] + [fmt(v) for v in row] for s, row in zip(sim.suite_ids, sim.values)])


def load_similarity_csv(path) -> SimilarityMatrix:
    header, body = _read_csv(path)
    ids = header[1:]
    if header[0] != "suite" or [r[0].strip() for _, r in body] != ids:
        raise DataError(f"{path}: expected a square matrix with matching suite header and rows")
    values = [[_parse_float(v, path, n, c) for v, c in zip(r[1:], ids)] for n, r in body]
    return SimilarityMatrix(tuple(ids), np.array(values))


def mdae_csv(ev: EvaluationMatrix) -> str:
    rows = [[s] + [fmt(v) for v in row] + [fmt(t)]
            for s, row, t in zip(ev.train_suites, ev.mdae, ev.train_mdae)]
    return _csv_text(["train_suite", *ev.test_suites, "train"], rows)


def load_mdae_csv(path) -> EvaluationMatrix:
    header, body = _read_csv(path)
    if header[0] != "train_suite" or header[-1] != "train":
        raise DataError(f"{path}: header must be train_suite,<test suites>,train")
    tests = header[1:-1]
    grid, train, trains = [], [], []
    for n, r in body:
        trains.append(r[0].strip())
        vals = [_parse_float(v, path, n, c) for v, c in zip(r[1:], header[1:])]
        if min(vals) < 0:
            raise DataError(f"{path}: row {n}: negative MDAE")
        grid.append(vals[:-1])
        train.append(vals[-1])
    return EvaluationMatrix(tuple(trains), tuple(tests), np.array(grid), np.array(train))


def kselection_csv(report: KSelectionReport) -> str:
    score = "silhouette" if report.method == "silhouette" else "distortion"
    rows = [[k, "" if np.isnan(s) else fmt(s), int(k == report.chosen_k)]
            for k, s in zip(report.candidate_ks, report.scores)]
    return _csv_text(["k", score, "chosen"], rows)


def table_csv(row_label, rows: dict, columns) -> str:
    """Rows keyed by label, one value per column (e.g. algorithms x test suites)."""
    return _csv_text([row_label, *columns], [[r] + [fmt(v) for v in vals] for r, vals in rows.items()])


def features_csv(corpus: Corpus) -> str:
    rows = [[s, i] + [repr(float(v)) for v in f]
            for s, i, f in zip(corpus.suites, corpus.instance_ids, corpus.features)]
    return _csv_text(["suite", "instance_id", *corpus.feature_names], rows)


def performance_csv(labeled: LabeledCorpus, precision) -> str:
    rows = [[s, i, labeled.algorithm, repr(float(p))]
            for (s, i), p in zip(labeled.corpus.keys, precision)]
    return _csv_text(["suite", "instance_id", "algorithm", "precision"], rows)


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class ArtifactWriter:
    """Collects artifacts in a staging directory, moved into place by :func:`staged`."""

    def __init__(self, staging: Path):
        self.staging = staging
        self.names: list[str] = []

    def write(self, name: str, text: str) -> None:
        (self.staging / name).write_text(text, encoding="utf-8", newline="\n")
        self.names.append(name)

    def hashes(self) -> dict:
        return {n: sha256(self.staging / n) for n in sorted(self.names)}


@contextlib.contextmanager
def staged(out_dir):
    """Yield an :class:`ArtifactWriter`; files reach ``out_dir`` only on success."""
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    try:
        writer = ArtifactWriter(tmp)
        yield writer
        out.mkdir(parents=True, exist_ok=True)
        for name in writer.names:
            os.replace(tmp / name, out / name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
