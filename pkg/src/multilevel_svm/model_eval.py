"""Confusion counts, imbalance-aware quality metrics, and the multi-criteria
model selection used within and across hierarchy levels.

G-mean (the geometric mean of sensitivity and specificity) is the primary
metric: it collapses to zero whenever a classifier gives up on either class,
which plain accuracy hides on imbalanced data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import math

import numpy as np

if TYPE_CHECKING:
    from .data_io import LabeledDataset
    from .svm_solver import SvmModel

GMEAN_TIE_BAND = 0.01


def _safe_rate(num: int, den: int) -> float:
    """num / den with 0/0 defined as 0 (keeps NaN out of model selection)."""
    return num / den if den > 0 else 0.0


@dataclass
class QualityMetrics:
    tp: int
    tn: int
    fp: int
    fn: int
    acc: float
    sn: float
    sp: float
    gmean: float

    @classmethod
    def from_counts(cls, tp: int, tn: int, fp: int, fn: int) -> "QualityMetrics":
        acc = _safe_rate(tp + tn, tp + tn + fp + fn)
        sn = _safe_rate(tp, tp + fn)
        sp = _safe_rate(tn, tn + fp)
        return cls(tp, tn, fp, fn, acc, sn, sp, math.sqrt(sp * sn))

    def as_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn,
                "acc": self.acc, "sn": self.sn, "sp": self.sp, "gmean": self.gmean}


def confusion_counts(predicted: np.ndarray, actual: np.ndarray) -> tuple[int, int, int, int]:
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    tp = int(np.count_nonzero((predicted == 1) & (actual == 1)))
    tn = int(np.count_nonzero((predicted == -1) & (actual == -1)))
    fp = int(np.count_nonzero((predicted == 1) & (actual == -1)))
    fn = int(np.count_nonzero((predicted == -1) & (actual == 1)))
    return tp, tn, fp, fn


def evaluate(model: "SvmModel", data: "LabeledDataset", attach: bool = True) -> QualityMetrics:
    """Score a model on labeled data and (by default) attach the result."""
    from .svm_solver import predict

    if data.n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    labels, _ = predict(model, data.points)
    metrics = QualityMetrics.from_counts(*confusion_counts(labels, data.labels))
    if attach:
        model.quality = metrics
    return metrics


def select_best(models: Sequence["SvmModel"], gmean_band: float = GMEAN_TIE_BAND) -> "SvmModel":
    """Pick the best evaluated model.

    G-mean rules; among models within ``gmean_band`` of the maximum the tie
    breaks by higher sensitivity, then fewer support vectors, then the
    coarser level (middle-level models generalize better than finest-level
    ones of equal quality), then the earlier list position.
    """
    if not models:
        raise ValueError("select_best needs at least one model")
    for m in models:
        if m.quality is None:
            raise ValueError("all models must be evaluated before selection")
    gmax = max(m.quality.gmean for m in models)
    best = None
    best_key = None
    for m in models:
        if m.quality.gmean < gmax - gmean_band:
            continue
        key = (m.quality.sn, -m.n_sv, m.level if m.level is not None else -1)
        if best is None or key > best_key:
            best, best_key = m, key
    return best
