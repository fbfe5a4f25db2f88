"""Benchmark dataset provisioning for the acceptance and demo runs.

Twonorm and ringnorm are distribution-defined benchmarks, so they are
regenerated deterministically here (class sizes fixed to the published
benchmark draws). Letter and cod-rna are real datasets: helpers convert the
raw downloads into the binary libsvm files the trainer consumes; the download
itself lives in scripts/fetch_benchmarks.py and never happens implicitly.
"""

from __future__ import annotations

import math

import numpy as np

TWONORM_SHIFT = 2.0 / math.sqrt(20.0)
RINGNORM_SHIFT = 1.0 / math.sqrt(20.0)

# canonical benchmark class sizes (positive, negative)
TWONORM_SIZES = (3703, 3697)
RINGNORM_SIZES = (3664, 3736)

SOURCE_URLS = {
    "cod-rna": "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/cod-rna",
    "letter": "https://archive.ics.uci.edu/ml/machine-learning-databases/"
              "letter-recognition/letter-recognition.data",
}


def make_twonorm(seed: int = 7, sizes: tuple[int, int] = TWONORM_SIZES):
    """Two 20-d unit-covariance gaussians with means +-(a, ..., a)."""
    rng = np.random.default_rng(seed)
    n_pos, n_neg = sizes
    pos = rng.standard_normal((n_pos, 20)) + TWONORM_SHIFT
    neg = rng.standard_normal((n_neg, 20)) - TWONORM_SHIFT
    return _shuffle_stack(rng, pos, neg)


def make_ringnorm(seed: int = 9, sizes: tuple[int, int] = RINGNORM_SIZES):
    """20-d two-class data: N(0, 4I) versus a unit-covariance shifted gaussian."""
    rng = np.random.default_rng(seed)
    n_pos, n_neg = sizes
    pos = 2.0 * rng.standard_normal((n_pos, 20))
    neg = rng.standard_normal((n_neg, 20)) + RINGNORM_SHIFT
    return _shuffle_stack(rng, pos, neg)


def _shuffle_stack(rng, pos: np.ndarray, neg: np.ndarray):
    points = np.vstack([pos, neg])
    labels = np.concatenate([np.ones(pos.shape[0], dtype=np.int64),
                             -np.ones(neg.shape[0], dtype=np.int64)])
    order = rng.permutation(points.shape[0])
    return points[order], labels[order]


def save_libsvm(path: str, points: np.ndarray, labels: np.ndarray) -> None:
    """Write points/labels as sparse libsvm text (zero entries skipped)."""
    with open(path, "w", encoding="utf-8") as fh:
        for row, label in zip(points, labels):
            feats = " ".join(f"{j + 1}:{float(v)!r}" for j, v in enumerate(row)
                             if v != 0.0)
            fh.write(f"{int(label):+d} {feats}\n")


def generate_synthetic(name: str, path: str, seed: int | None = None) -> str:
    """Write twonorm or ringnorm to ``path`` and return it."""
    if name == "twonorm":
        points, labels = make_twonorm(seed if seed is not None else 7)
    elif name == "ringnorm":
        points, labels = make_ringnorm(seed if seed is not None else 9)
    else:
        raise ValueError(f"unknown synthetic benchmark {name!r}")
    save_libsvm(path, points, labels)
    return path


def prepare_letter(raw_path: str, out_path: str, positive_letter: str = "Z") -> str:
    """Binarize the UCI letter-recognition file: one letter versus the rest."""
    lines_out = []
    with open(raw_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            label = 1 if fields[0].strip().upper() == positive_letter else -1
            feats = " ".join(f"{j}:{int(v)}" for j, v in enumerate(fields[1:], start=1)
                             if int(v) != 0)
            lines_out.append(f"{label:+d} {feats}\n")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.writelines(lines_out)
    return out_path


def prepare_codrna(raw_path: str, out_path: str) -> str:
    """Normalize the cod-rna libsvm download (labels to +-1, unix newlines)."""
    lines_out = []
    with open(raw_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            label = int(float(tokens[0]))
            lines_out.append(f"{label:+d} " + " ".join(tokens[1:]) + "\n")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.writelines(lines_out)
    return out_path
