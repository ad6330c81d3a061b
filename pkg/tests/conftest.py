from importlib import resources
from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(str(resources.files("suitesim") / "fixtures"))
ACCEPTANCE_LINES = []


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def write_csv(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write


def blobs(centers, per_blob, spread, seed):
    """Isotropic Gaussian blobs; returns (points, true labels)."""
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    X = np.vstack([c + spread * rng.standard_normal((per_blob, centers.shape[1])) for c in centers])
    return X, np.repeat(np.arange(len(centers)), per_blob)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
