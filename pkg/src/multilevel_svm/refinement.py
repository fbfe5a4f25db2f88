"""Uncoarsening driver: disaggregate coarse support vectors into the finer
training set, retrain each level around the inherited parameters, stop early
when training sets outgrow the threshold, and pick the final model across all
levels.

Only support-vector neighborhoods travel down the hierarchy; a level whose
disaggregated training set reaches theta points is flagged and nothing finer
is trained, with the best model so far carrying through.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coarsening import HierarchyLevel, InterpolationOperator, LevelHierarchy
from .data_io import LabeledDataset
from .model_eval import select_best
from .param_fit import LogPoint, NudConfig, TrainOptions, nud_search
from .recovery import RecoveryState, detect_and_recover
from .svm_solver import SvmModel


@dataclass
class RefinementConfig:
    theta: int = 3000            # early-stopping size threshold (>= 2M)
    delta: float = 0.05          # significant quality-drop threshold
    p_neighbors: int = 1         # positive-class neighbors per misclassified point
    n_neighbors: int = 1         # negative-class neighbors per misclassified point
    recovery_enabled: bool = True

    def __post_init__(self):
        if self.theta < 2:
            raise ValueError("theta must be >= 2")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.p_neighbors < 0 or self.n_neighbors < 0:
            raise ValueError("neighbor counts must be >= 0")


@dataclass(eq=False)
class LevelSolution:
    """Everything recorded for one level of the walk back up the hierarchy."""

    level_index: int                    # list index, 0 = finest
    spec_level: int                     # 1-based level number (1 = finest)
    pos_rows: np.ndarray
    neg_rows: np.ndarray
    best_model: SvmModel | None
    best_log: LogPoint | None
    quality: float | None               # validation G-mean of the level best
    models_trained: int
    early_stop: bool
    recovery_event: dict | None
    pos_sv_rows: np.ndarray | None = None
    neg_sv_rows: np.ndarray | None = None
    nud_center: LogPoint | None = None      # search center this level used
    nud_logs: list[LogPoint] | None = None  # every candidate actually trained


@dataclass(eq=False)
class PipelineResult:
    final_model: SvmModel
    final_log: LogPoint
    solutions: list[LevelSolution]
    report_rows: list[dict] = field(default_factory=list)


def level_training_set(level: HierarchyLevel, pos_rows: np.ndarray,
                       neg_rows: np.ndarray) -> LabeledDataset:
    """Assemble the SVM training set from per-class level rows.

    Positive rows come first; ids encode (class, level row) uniquely so SV
    indices can be mapped back per class.
    """
    pos_rows = np.asarray(pos_rows, dtype=np.int64)
    neg_rows = np.asarray(neg_rows, dtype=np.int64)
    points = np.vstack([level.pos.points[pos_rows], level.neg.points[neg_rows]])
    labels = np.concatenate([np.ones(pos_rows.size, dtype=np.int64),
                             -np.ones(neg_rows.size, dtype=np.int64)])
    volumes = np.concatenate([level.pos.volumes[pos_rows], level.neg.volumes[neg_rows]])
    ids = np.concatenate([pos_rows, level.pos.size + neg_rows])
    return LabeledDataset(points, labels, volumes, ids)


def split_sv_rows(model: SvmModel, pos_rows: np.ndarray,
                  neg_rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map a model's support-vector indices back to per-class level rows."""
    boundary = pos_rows.size
    sv = model.sv_indices
    return pos_rows[sv[sv < boundary]], neg_rows[sv[sv >= boundary] - boundary]


def disaggregate(sv_columns: np.ndarray, interp: InterpolationOperator) -> np.ndarray:
    """Finer-level rows covered by the aggregates of the given coarse points."""
    return interp.aggregate_union(sv_columns)


def _solution_row(sol: LevelSolution) -> dict:
    model = sol.best_model
    row = {
        "level": sol.spec_level,
        "pos_size": int(sol.pos_rows.size),
        "neg_size": int(sol.neg_rows.size),
        "early_stop": sol.early_stop,
        "models_trained": sol.models_trained,
        "recovered": bool(sol.recovery_event["accepted"]) if sol.recovery_event else False,
        "recovery": sol.recovery_event,
    }
    if model is not None:
        row.update({
            "c": model.params.c, "gamma": model.params.gamma,
            "acc": model.quality.acc, "sn": model.quality.sn,
            "sp": model.quality.sp, "gmean": model.quality.gmean,
            "n_sv": model.n_sv,
        })
    else:
        row.update({"c": None, "gamma": None, "acc": None, "sn": None,
                    "sp": None, "gmean": None, "n_sv": None})
    return row


def refine_level(hierarchy: LevelHierarchy, index: int, inherited: LevelSolution,
                 validation: LabeledDataset, cfg: RefinementConfig,
                 nud_cfg: NudConfig, opts: TrainOptions,
                 state: RecoveryState) -> LevelSolution:
    """One refinement step from the coarser solution to level ``index``.

    The training set is the union of the aggregates behind the inherited
    support vectors; a class emptied by disaggregation falls back to the full
    level data for that class. When the combined size reaches theta the level
    is marked early-stopped and nothing is trained.
    """
    level = hierarchy.levels[index]
    coarser = hierarchy.levels[index + 1]
    pos_rows = disaggregate(inherited.pos_sv_rows, coarser.pos.interp)
    neg_rows = disaggregate(inherited.neg_sv_rows, coarser.neg.interp)
    if pos_rows.size == 0:
        pos_rows = np.arange(level.pos.size, dtype=np.int64)
    if neg_rows.size == 0:
        neg_rows = np.arange(level.neg.size, dtype=np.int64)
    spec_level = hierarchy.spec_level(index)

    if pos_rows.size + neg_rows.size >= cfg.theta:
        return LevelSolution(index, spec_level, pos_rows, neg_rows, None, None,
                             None, 0, True, None)

    train = level_training_set(level, pos_rows, neg_rows)
    result = nud_search(train, validation, inherited.best_log, nud_cfg, opts,
                        level=spec_level)
    model, best_log = result.best_model, result.best_log
    event = None
    if cfg.recovery_enabled:
        outcome = detect_and_recover(level, spec_level, model, best_log,
                                     pos_rows, neg_rows, validation, state,
                                     nud_cfg, opts)
        model, best_log = outcome.model, outcome.best_log
        pos_rows, neg_rows = outcome.pos_rows, outcome.neg_rows
        event = outcome.event

    pos_sv, neg_sv = split_sv_rows(model, pos_rows, neg_rows)
    return LevelSolution(index, spec_level, pos_rows, neg_rows, model, best_log,
                         model.quality.gmean, result.models_trained, False, event,
                         pos_sv, neg_sv, nud_center=inherited.best_log,
                         nud_logs=result.model_logs)


def run_pipeline(hierarchy: LevelHierarchy, validation: LabeledDataset,
                 cfg: RefinementConfig | None = None,
                 nud_cfg: NudConfig | None = None,
                 opts: TrainOptions | None = None) -> PipelineResult:
    """Train the coarsest level with a fresh parameter search, walk the
    hierarchy coarse to fine, and select the final model across levels.

    The per-level report carries sizes, chosen parameters, validation
    metrics, support-vector and model-training counts, recovery events, and
    the early-stop flag.
    """
    cfg = cfg or RefinementConfig()
    nud_cfg = nud_cfg or NudConfig()
    opts = opts or TrainOptions()

    coarsest_index = hierarchy.level_count - 1
    coarsest = hierarchy.levels[coarsest_index]
    pos_rows = np.arange(coarsest.pos.size, dtype=np.int64)
    neg_rows = np.arange(coarsest.neg.size, dtype=np.int64)
    train = level_training_set(coarsest, pos_rows, neg_rows)
    result = nud_search(train, validation, None, nud_cfg, opts,
                        level=hierarchy.spec_level(coarsest_index))
    pos_sv, neg_sv = split_sv_rows(result.best_model, pos_rows, neg_rows)
    solutions = [LevelSolution(coarsest_index, hierarchy.spec_level(coarsest_index),
                               pos_rows, neg_rows, result.best_model, result.best_log,
                               result.best_model.quality.gmean, result.models_trained,
                               False, None, pos_sv, neg_sv, nud_center=None,
                               nud_logs=result.model_logs)]
    state = RecoveryState(q_max=result.best_model.quality.gmean, delta=cfg.delta,
                          p_neighbors=cfg.p_neighbors, n_neighbors=cfg.n_neighbors)

    for index in range(coarsest_index - 1, -1, -1):
        solution = refine_level(hierarchy, index, solutions[-1], validation,
                                cfg, nud_cfg, opts, state)
        solutions.append(solution)
        if solution.early_stop:
            break

    candidates = [s.best_model for s in solutions if s.best_model is not None]
    final = select_best(candidates)
    final_log = next(s.best_log for s in solutions if s.best_model is final)
    report_rows = [_solution_row(s) for s in solutions]
    return PipelineResult(final, final_log, solutions, report_rows)
