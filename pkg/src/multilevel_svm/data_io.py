"""Dataset ingestion, z-score normalization, stratified k-fold split plans,
and class-ratio validation sampling for imbalanced binary classification.

Labels are always remapped so the minority class is +1; per-point volumes
start at 1.0 and carry importance mass through the coarsening hierarchy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DataError(ValueError):
    """Unreadable, malformed, or single-class input data."""


@dataclass(eq=False)
class LabeledDataset:
    """Points with {+1,-1} labels, positive volumes, and stable ids.

    ids are original-point indices: they survive shuffles and subsetting, so
    test isolation can be asserted on ids rather than row positions.
    """

    points: np.ndarray   # (n, d) float64
    labels: np.ndarray   # (n,)  int, +1 or -1
    volumes: np.ndarray  # (n,)  float64, all > 0
    ids: np.ndarray      # (n,)  int64, unique

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.volumes = np.asarray(self.volumes, dtype=np.float64)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        n = self.points.shape[0]
        if n < 1:
            raise DataError("dataset must contain at least one point")
        if self.labels.shape != (n,) or self.volumes.shape != (n,) or self.ids.shape != (n,):
            raise DataError("points, labels, volumes and ids must have matching length")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise DataError("labels must be +1 or -1")
        if not np.all(self.volumes > 0):
            raise DataError("volumes must be positive")
        if np.unique(self.ids).size != n:
            raise DataError("ids must be unique")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def class_rows(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    def class_counts(self) -> tuple[int, int]:
        """(n_positive, n_negative)."""
        npos = int(np.count_nonzero(self.labels == 1))
        return npos, self.n - npos

    def subset(self, rows: np.ndarray) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return LabeledDataset(self.points[rows], self.labels[rows],
                              self.volumes[rows], self.ids[rows])


@dataclass(eq=False)
class NormalizationStats:
    """Per-feature mean and (population) standard deviation of a training set."""

    mean: np.ndarray    # (d,)
    stddev: np.ndarray  # (d,), all > 0; constant features stored as 1.0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.stddev = np.asarray(self.stddev, dtype=np.float64)
        if not np.all(self.stddev > 0):
            raise DataError("stddev components must be positive")


@dataclass(eq=False)
class SplitPlan:
    """Stratified fold assignment for every row of one dataset."""

    fold_count: int
    assignments: np.ndarray  # (n,) int, values in [0, fold_count)
    seed: int

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


@dataclass(eq=False)
class ValidationSample:
    """Row indices (into the finest training fold) held out for validation.

    Sampled once per fold and reused at every level of the hierarchy so that
    level qualities are directly comparable.
    """

    rows: np.ndarray
    minority_ratio: float
    majority_ratio: float


def _binarize_labels(raw: list) -> np.ndarray:
    """Map two raw label values to {+1,-1} with the minority class as +1.

    An exact 50/50 tie is broken by raw label order: the larger raw label
    becomes +1 (keeps native {-1,+1} files unchanged).
    """
    values = sorted(set(raw), key=str) if any(isinstance(v, str) for v in raw) else sorted(set(raw))
    if len(values) < 2:
        raise DataError("dataset contains a single class; two classes required")
    if len(values) > 2:
        raise DataError(f"dataset contains {len(values)} distinct labels; exactly two required")
    lo, hi = values
    n_hi = sum(1 for v in raw if v == hi)
    n_lo = len(raw) - n_hi
    positive = hi if n_hi <= n_lo else lo
    return np.array([1 if v == positive else -1 for v in raw], dtype=np.int64)


def _parse_libsvm(path: str) -> tuple[np.ndarray, list]:
    rows: list[list[tuple[int, float]]] = []
    raw_labels: list = []
    max_index = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            try:
                raw_labels.append(float(tokens[0]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: label {tokens[0]!r} is not numeric") from None
            row = []
            for tok in tokens[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: malformed feature entry {tok!r}") from None
                if idx < 1:
                    raise DataError(f"{path}:{lineno}: feature indices are 1-based, got {idx}")
                row.append((idx, val))
                max_index = max(max_index, idx)
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data lines")
    points = np.zeros((len(rows), max(max_index, 1)), dtype=np.float64)
    for i, row in enumerate(rows):
        for idx, val in row:
            points[i, idx - 1] = val
    return points, raw_labels


def _parse_csv(path: str, label_col: int, header: bool) -> tuple[np.ndarray, list]:
    feats: list[list[float]] = []
    raw_labels: list = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if header and lineno == 1:
                continue
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
                if width < 2:
                    raise DataError(f"{path}:{lineno}: need at least one feature and a label")
            elif len(fields) != width:
                raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(fields)}")
            col = label_col if label_col >= 0 else width + label_col
            if not 0 <= col < width:
                raise DataError(f"{path}: label column {label_col} out of range for {width} fields")
            label_tok = fields[col].strip()
            try:
                raw_labels.append(float(label_tok))
            except ValueError:
                raw_labels.append(label_tok)
            try:
                feats.append([float(f) for j, f in enumerate(fields) if j != col])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
    if not feats:
        raise DataError(f"{path}: no data lines")
    return np.asarray(feats, dtype=np.float64), raw_labels


def load_dataset(path: str, fmt: str = "libsvm", *, label_col: int = 0,
                 header: bool = False) -> LabeledDataset:
    """Read a libsvm or CSV file into a LabeledDataset.

    libsvm lines are ``label index:value ...`` with 1-based indices; absent
    sparse entries are zero and the dimensionality is the largest index seen.
    CSV files use a comma delimiter, an optional header row, and a
    configurable label column. Volumes are initialized to 1.0 and ids to the
    0-based data-line position.
    """
    try:
        if fmt == "libsvm":
            points, raw_labels = _parse_libsvm(path)
        elif fmt == "csv":
            points, raw_labels = _parse_csv(path, label_col, header)
        else:
            raise DataError(f"unknown dataset format {fmt!r}")
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from None
    labels = _binarize_labels(raw_labels)
    n = points.shape[0]
    return LabeledDataset(points, labels, np.ones(n), np.arange(n, dtype=np.int64))


def load_points_csv(path: str, header: bool = False) -> np.ndarray:
    """Read an unlabeled CSV file (features only) into an (n, d) array."""
    feats = []
    width = None
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if header and lineno == 1:
                continue
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(fields)}")
            try:
                feats.append([float(f) for f in fields])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
    if not feats:
        raise DataError(f"{path}: no data lines")
    return np.asarray(feats, dtype=np.float64)


def apply_normalization(points: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """Apply stored z-score statistics to a point matrix."""
    return (np.asarray(points, dtype=np.float64) - stats.mean) / stats.stddev


def zscore_normalize(ds: LabeledDataset) -> tuple[LabeledDataset, NormalizationStats]:
    """Standardize each feature to mean 0, population stddev 1.

    Constant (zero-variance) features keep their centered value and get a
    stored stddev of 1 so that applying the stats to test data never divides
    by zero. The returned stats reproduce the normalized training points
    bit-for-bit via apply_normalization.
    """
    if ds.n < 2:
        raise DataError("z-score normalization needs at least 2 points")
    mean = ds.points.mean(axis=0)
    std = ds.points.std(axis=0)
    floor = 1e-12 * np.maximum(np.abs(mean), 1.0)
    std = np.where(std <= floor, 1.0, std)
    stats = NormalizationStats(mean, std)
    normalized = LabeledDataset(apply_normalization(ds.points, stats), ds.labels,
                                ds.volumes, ds.ids)
    return normalized, stats


def make_split_plan(ds: LabeledDataset, k: int, seed: int) -> SplitPlan:
    """Assign every row to one of k folds, stratified per class.

    Within each class the rows are shuffled with the given seed and dealt
    round-robin, so per-class fold sizes differ by at most one and the
    assignment is reproducible.
    """
    if k < 2:
        raise DataError(f"fold count must be >= 2, got {k}")
    for label in (1, -1):
        if ds.class_rows(label).size < k:
            raise DataError(f"class {label:+d} has fewer than {k} points; cannot build {k} folds")
    rng = np.random.default_rng(seed)
    assignments = np.empty(ds.n, dtype=np.int64)
    for label in (1, -1):
        rows = ds.class_rows(label)
        perm = rng.permutation(rows)
        assignments[perm] = np.arange(rows.size) % k
    return SplitPlan(k, assignments, seed)


def sample_validation(train: LabeledDataset, r_min: float = 0.5, r_maj: float = 0.1,
                      seed: int = 0) -> ValidationSample:
    """Draw the fixed validation sample from the finest training fold.

    ceil(r_min * n+) minority and ceil(r_maj * n-) majority rows are drawn
    uniformly without replacement. The sample is fixed once per fold and
    reused at every level; the sampled rows are excluded from every level's
    SVM training set.
    """
    if not (0 < r_min <= 1 and 0 < r_maj <= 1):
        raise DataError("validation ratios must lie in (0, 1]")
    pos = train.class_rows(1)
    neg = train.class_rows(-1)
    if pos.size == 0 or neg.size == 0:
        raise DataError("training fold is missing a class")
    rng = np.random.default_rng(seed)
    take_pos = rng.choice(pos, size=math.ceil(r_min * pos.size), replace=False)
    take_neg = rng.choice(neg, size=math.ceil(r_maj * neg.size), replace=False)
    rows = np.sort(np.concatenate([take_pos, take_neg]))
    return ValidationSample(rows, r_min, r_maj)
