"""Nested two-stage uniform-design search over (C, gamma) in log2 space.

Stage one lays a small lattice over a rectangle centered on the parameters
inherited from the coarser level (rectangle midpoint when nothing is
inherited); stage two recenters a half-size lattice on the stage-one winner.
Candidates are carried in log2 space end to end so the inherited center is
reproduced bit-exactly among the evaluated candidates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data_io import LabeledDataset
from .model_eval import evaluate, select_best
from .svm_solver import (DEFAULT_CACHE_BYTES, DEFAULT_MAX_ITER, DEFAULT_TOL,
                         SvmModel, SvmParams, TrainingError, squared_distances,
                         train_wsvm)

LogPoint = tuple[float, float]
_DEDUP_TOL = 1e-9


@dataclass
class NudConfig:
    log2c_range: tuple[float, float] = (-5.0, 15.0)
    log2g_range: tuple[float, float] = (-15.0, 3.0)
    stage1_count: int = 9
    stage2_count: int = 4
    shrink: float = 0.5

    def __post_init__(self):
        for lo, hi in (self.log2c_range, self.log2g_range):
            if not lo <= hi:
                raise ValueError("search ranges must satisfy lo <= hi")
        if self.stage1_count < 1 or self.stage2_count < 0:
            raise ValueError("stage1_count must be >= 1 and stage2_count >= 0")
        if not 0 < self.shrink <= 1:
            raise ValueError("shrink must lie in (0, 1]")

    def midpoint(self) -> LogPoint:
        return (0.5 * (self.log2c_range[0] + self.log2c_range[1]),
                0.5 * (self.log2g_range[0] + self.log2g_range[1]))

    def widths(self) -> tuple[float, float]:
        return (self.log2c_range[1] - self.log2c_range[0],
                self.log2g_range[1] - self.log2g_range[0])

    def clip(self, point: LogPoint) -> LogPoint:
        return (min(max(point[0], self.log2c_range[0]), self.log2c_range[1]),
                min(max(point[1], self.log2g_range[0]), self.log2g_range[1]))


@dataclass
class TrainOptions:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    cache_bytes: int = DEFAULT_CACHE_BYTES
    threads: int = 1


@dataclass(eq=False)
class NudResult:
    best_model: SvmModel
    best_log: LogPoint
    models: list[SvmModel]
    model_logs: list[LogPoint]
    stage1_points: list[LogPoint]
    stage2_points: list[LogPoint]
    stage2_center: LogPoint | None
    trace: list[dict] = field(default_factory=list)

    @property
    def models_trained(self) -> int:
        return len(self.models)


def nud_candidates(center: LogPoint, widths: tuple[float, float], count: int,
                   cfg: NudConfig) -> list[LogPoint]:
    """Lattice of candidate points around a center, clipped and deduplicated.

    A single-point design is the center itself; otherwise a square lattice
    spanning the rectangle is laid row-major (odd side lengths include the
    center exactly). Points collapsing inside 1e-9 in log space are dropped,
    keeping the first occurrence.
    """
    center = cfg.clip(center)
    if count == 1:
        return [center]
    side = math.ceil(math.sqrt(count))
    offs_c = np.linspace(-0.5 * widths[0], 0.5 * widths[0], side)
    offs_g = np.linspace(-0.5 * widths[1], 0.5 * widths[1], side)
    points: list[LogPoint] = []
    for dc in offs_c:
        for dg in offs_g:
            if len(points) == count:
                break
            points.append(cfg.clip((center[0] + float(dc), center[1] + float(dg))))
    unique: list[LogPoint] = []
    for pt in points:
        if not any(abs(pt[0] - u[0]) <= _DEDUP_TOL and abs(pt[1] - u[1]) <= _DEDUP_TOL
                   for u in unique):
            unique.append(pt)
    return unique


def _train_candidates(points: list[LogPoint], train: LabeledDataset,
                      validation: LabeledDataset, opts: TrainOptions,
                      sqdist: np.ndarray | None, level: int | None,
                      stage: int, trace: list[dict]):
    """Train and evaluate one stage's candidates; failed candidates drop out.

    Uses a thread pool when opts.threads > 1; results are collected in
    candidate order, so the outcome is independent of completion order.
    """

    def job(point: LogPoint):
        params = SvmParams(2.0 ** point[0], 2.0 ** point[1])
        try:
            model = train_wsvm(train, params, tol=opts.tol, max_iter=opts.max_iter,
                               cache_bytes=opts.cache_bytes, sqdist=sqdist, level=level)
        except TrainingError as exc:
            return exc
        evaluate(model, validation)
        return model

    if opts.threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            outcomes = list(pool.map(job, points))
    else:
        outcomes = [job(pt) for pt in points]

    models: list[SvmModel] = []
    logs: list[LogPoint] = []
    for point, outcome in zip(points, outcomes):
        row = {"stage": stage, "log2c": point[0], "log2g": point[1]}
        if isinstance(outcome, Exception):
            row["error"] = str(outcome)
        else:
            row.update({"gmean": outcome.quality.gmean, "sn": outcome.quality.sn,
                        "n_sv": outcome.n_sv})
            models.append(outcome)
            logs.append(point)
        trace.append(row)
    return models, logs


def nud_search(train: LabeledDataset, validation: LabeledDataset,
               center: LogPoint | None, cfg: NudConfig | None = None,
               opts: TrainOptions | None = None,
               level: int | None = None) -> NudResult:
    """Two-stage search: train one model per candidate, evaluate on the
    fixed validation sample, recenter on the stage-one best, return the
    overall best.

    Stage-two points that coincide with already-trained stage-one points are
    not retrained, so at most stage1_count + stage2_count models are fitted.
    Raises TrainingError only if every candidate fails.
    """
    cfg = cfg or NudConfig()
    opts = opts or TrainOptions()
    center = cfg.clip(center) if center is not None else cfg.midpoint()

    n = train.n
    sqdist = None
    if n * n * 8 <= opts.cache_bytes:
        sqdist = squared_distances(train.points, train.points)

    trace: list[dict] = []
    stage1 = nud_candidates(center, cfg.widths(), cfg.stage1_count, cfg)
    models, logs = _train_candidates(stage1, train, validation, opts, sqdist,
                                     level, 1, trace)
    stage2: list[LogPoint] = []
    stage2_center: LogPoint | None = None
    if models and cfg.stage2_count > 0:
        stage1_best = select_best(models)
        stage2_center = logs[models.index(stage1_best)]
        widths2 = (cfg.widths()[0] * cfg.shrink, cfg.widths()[1] * cfg.shrink)
        raw2 = nud_candidates(stage2_center, widths2, cfg.stage2_count, cfg)
        stage2 = [pt for pt in raw2
                  if not any(abs(pt[0] - s[0]) <= _DEDUP_TOL and abs(pt[1] - s[1]) <= _DEDUP_TOL
                             for s in stage1)]
        more_models, more_logs = _train_candidates(stage2, train, validation, opts,
                                                   sqdist, level, 2, trace)
        models.extend(more_models)
        logs.extend(more_logs)

    if not models:
        raise TrainingError("all parameter-search candidates failed to train")
    best = select_best(models)
    return NudResult(best_model=best, best_log=logs[models.index(best)],
                     models=models, model_logs=logs, stage1_points=stage1,
                     stage2_points=stage2, stage2_center=stage2_center, trace=trace)
