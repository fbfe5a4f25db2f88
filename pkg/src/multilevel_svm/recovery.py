"""Detection and recovery of classification-quality drops during refinement.

A level whose validation G-mean falls more than a threshold below the running
maximum of the coarser levels gets its training set augmented with the
nearest same-class and other-class neighbors of every misclassified
validation point, drawn from the level's full data. The augmented retraining
is kept only if it strictly improves validation quality, so the returned
model never scores below the incoming one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coarsening import HierarchyLevel
from .data_io import LabeledDataset
from .param_fit import LogPoint, NudConfig, TrainOptions, nud_search
from .svm_solver import SvmModel, predict, squared_distances


@dataclass
class RecoveryState:
    """Running maximum of level qualities plus the recovery knobs.

    q_max only moves upward across a run; p/n are the per-misclassified-point
    neighbor counts for each class (kept at 1 so augmentation stays small
    relative to the validation sample).
    """

    q_max: float
    delta: float = 0.05
    p_neighbors: int = 1
    n_neighbors: int = 1


@dataclass(eq=False)
class RecoveryOutcome:
    model: SvmModel
    best_log: LogPoint
    pos_rows: np.ndarray
    neg_rows: np.ndarray
    recovered: bool
    event: dict
    state: RecoveryState


def nearest_rows(queries: np.ndarray, points: np.ndarray, count: int) -> np.ndarray:
    """Row indices of the ``count`` nearest points per query (ties to the
    lower index); brute force, adequate for level-sized data."""
    if count == 0 or points.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    count = min(count, points.shape[0])
    d2 = squared_distances(queries, points)
    if count == 1:
        return np.argmin(d2, axis=1).astype(np.int64)
    picked = np.empty((queries.shape[0], count), dtype=np.int64)
    cols = np.arange(points.shape[0])
    for r in range(queries.shape[0]):
        order = np.lexsort((cols, d2[r]))
        picked[r] = order[:count]
    return picked.ravel()


def _augment_rows(found: np.ndarray, existing: np.ndarray) -> np.ndarray:
    """Distinct found rows not already in the training set."""
    return np.setdiff1d(np.unique(found), existing, assume_unique=False)


def detect_and_recover(level: HierarchyLevel, spec_level: int, model: SvmModel,
                       best_log: LogPoint, pos_rows: np.ndarray, neg_rows: np.ndarray,
                       validation: LabeledDataset, state: RecoveryState,
                       nud_cfg: NudConfig, opts: TrainOptions) -> RecoveryOutcome:
    """Run the drop check for one level and retrain on augmented data if it
    fires.

    The incoming model must already carry its validation quality. The state's
    running maximum is updated with the level's final quality either way.
    """
    from .refinement import level_training_set

    if model.quality is None:
        raise ValueError("the level's best model must be evaluated before recovery")
    q_c = model.quality.gmean
    event = {"triggered": False, "false_pos": 0, "false_neg": 0, "added": 0,
             "q_before": q_c, "q_after": None, "accepted": False, "models_trained": 0}

    drop = state.q_max - q_c
    if q_c > state.q_max or drop <= state.delta:
        state.q_max = max(state.q_max, q_c)
        return RecoveryOutcome(model, best_log, pos_rows, neg_rows, False, event, state)

    predicted, _ = predict(model, validation.points)
    false_pos = np.flatnonzero((predicted == 1) & (validation.labels == -1))
    false_neg = np.flatnonzero((predicted == -1) & (validation.labels == 1))
    misclassified = np.concatenate([false_pos, false_neg])
    if misclassified.size == 0:
        # unreachable: gmean below a running maximum implies validation errors
        raise AssertionError("quality drop detected with zero validation errors")
    event.update({"triggered": True, "false_pos": int(false_pos.size),
                  "false_neg": int(false_neg.size)})

    queries = validation.points[np.sort(misclassified)]
    new_pos = _augment_rows(nearest_rows(queries, level.pos.points, state.p_neighbors),
                            pos_rows)
    new_neg = _augment_rows(nearest_rows(queries, level.neg.points, state.n_neighbors),
                            neg_rows)
    event["added"] = int(new_pos.size + new_neg.size)
    if event["added"] == 0:
        # every neighbor is already in the training set; retraining cannot differ
        state.q_max = max(state.q_max, q_c)
        return RecoveryOutcome(model, best_log, pos_rows, neg_rows, False, event, state)

    aug_pos = np.sort(np.concatenate([pos_rows, new_pos]))
    aug_neg = np.sort(np.concatenate([neg_rows, new_neg]))
    train_aug = level_training_set(level, aug_pos, aug_neg)
    result = nud_search(train_aug, validation, best_log, nud_cfg, opts, level=spec_level)
    q_a = result.best_model.quality.gmean
    event.update({"q_after": q_a, "models_trained": result.models_trained})

    if q_a > q_c:
        event["accepted"] = True
        state.q_max = max(state.q_max, q_a)
        return RecoveryOutcome(result.best_model, result.best_log, aug_pos, aug_neg,
                               True, event, state)
    state.q_max = max(state.q_max, q_c)
    return RecoveryOutcome(model, best_log, pos_rows, neg_rows, False, event, state)
