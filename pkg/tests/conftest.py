import os
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = Path(os.environ.get("MLSVM_DATA", REPO_ROOT / "data"))


def dataset_path(name: str) -> Path:
    return DATA_DIR / name


def require_dataset(name: str) -> Path:
    """Path to a prepared benchmark file, skipping when it is absent."""
    path = dataset_path(name)
    if not path.exists():
        pytest.skip(f"benchmark file {path} not available; run "
                    f"scripts/fetch_benchmarks.py on a machine with network access")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_blobs(rng, n_pos=40, n_neg=80, spread=0.6, gap=2.0, dim=2):
    """Two gaussian blobs with the positive class rarer; labels +-1."""
    pos = rng.normal(loc=gap / 2, scale=spread, size=(n_pos, dim))
    neg = rng.normal(loc=-gap / 2, scale=spread, size=(n_neg, dim))
    points = np.vstack([pos, neg])
    labels = np.concatenate([np.ones(n_pos, dtype=np.int64),
                             -np.ones(n_neg, dtype=np.int64)])
    return points, labels
