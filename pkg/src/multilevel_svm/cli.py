"""End-to-end commands (train, predict, report), run configuration, model
persistence, and run traces.

All outputs are JSON / JSON-lines / CSV and fully determined by (dataset
bytes, config, seed); wall-clock timing goes to stdout and run_meta.json so
the summary and traces stay byte-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .coarsening import CoarseningConfig, build_hierarchy, hierarchy_trace
from .data_io import (DataError, LabeledDataset, NormalizationStats,
                      apply_normalization, load_dataset, load_points_csv,
                      make_split_plan, sample_validation, zscore_normalize)
from .knn_graph import build_knn_graph, dump_edges
from .model_eval import QualityMetrics, confusion_counts
from .param_fit import NudConfig, TrainOptions
from .refinement import RefinementConfig, run_pipeline
from .svm_solver import SvmModel, SvmParams, TrainingError, predict

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRAIN = 3

MODEL_FORMAT_VERSION = 1


class UsageError(ValueError):
    """Bad flags or inconsistent configuration (exit code 1)."""


@dataclass
class RunConfig:
    """Every tunable of a training run; serialized alongside all outputs."""

    fmt: str = "libsvm"
    label_col: int = 0
    header: bool = False
    kfold: int = 5
    seed: int = 0
    knn: int = 10
    coarsest_size: int = 300
    eta: float = 2.0
    q_seed: float = 0.5
    interp_order: int = 2
    theta: int = 3000
    delta: float = 0.05
    p_neighbors: int = 1
    n_neighbors: int = 1
    val_min_ratio: float = 0.5
    val_maj_ratio: float = 0.1
    log2c_range: tuple[float, float] = (-5.0, 15.0)
    log2g_range: tuple[float, float] = (-15.0, 3.0)
    nud_stage1: int = 9
    nud_stage2: int = 4
    recovery: bool = True
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    dump_graphs: bool = False
    dump_hierarchy: bool = False

    def validate(self) -> "RunConfig":
        if self.fmt not in ("libsvm", "csv"):
            raise UsageError(f"unknown format {self.fmt!r}")
        if self.kfold < 2:
            raise UsageError("--kfold must be >= 2")
        if self.knn < 1:
            raise UsageError("--knn must be >= 1")
        if self.coarsest_size < 1:
            raise UsageError("--coarsest-size must be >= 1")
        if self.theta < 2 * self.coarsest_size:
            raise UsageError("--theta must be at least twice --coarsest-size")
        if not 0 < self.delta < 1:
            raise UsageError("--delta must lie in (0, 1)")
        if not (0 < self.val_min_ratio <= 1 and 0 < self.val_maj_ratio <= 1):
            raise UsageError("validation ratios must lie in (0, 1]")
        if self.p_neighbors < 0 or self.n_neighbors < 0:
            raise UsageError("--p and --n must be >= 0")
        if self.nud_stage1 < 1 or self.nud_stage2 < 0:
            raise UsageError("--nud-stage1 must be >= 1 and --nud-stage2 >= 0")
        for name, (lo, hi) in (("--log2c-range", self.log2c_range),
                               ("--log2g-range", self.log2g_range)):
            if not lo <= hi:
                raise UsageError(f"{name} must satisfy LO <= HI")
        if self.threads < 1:
            raise UsageError("--threads must be >= 1")
        if not 0 <= self.q_seed < 1:
            raise UsageError("--q-seed must lie in [0, 1)")
        if self.eta <= 0:
            raise UsageError("--eta must be positive")
        if self.interp_order < 1:
            raise UsageError("--interp-order must be >= 1")
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        data["log2c_range"] = list(self.log2c_range)
        data["log2g_range"] = list(self.log2g_range)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        kwargs = dict(data)
        kwargs["log2c_range"] = tuple(kwargs["log2c_range"])
        kwargs["log2g_range"] = tuple(kwargs["log2g_range"])
        return cls(**kwargs)

    def coarsening_config(self) -> CoarseningConfig:
        return CoarseningConfig(coarsest_size=self.coarsest_size, eta=self.eta,
                                q_seed=self.q_seed, interp_order=self.interp_order)

    def refinement_config(self) -> RefinementConfig:
        return RefinementConfig(theta=self.theta, delta=self.delta,
                                p_neighbors=self.p_neighbors,
                                n_neighbors=self.n_neighbors,
                                recovery_enabled=self.recovery)

    def nud_config(self) -> NudConfig:
        return NudConfig(log2c_range=self.log2c_range, log2g_range=self.log2g_range,
                         stage1_count=self.nud_stage1, stage2_count=self.nud_stage2)

    def train_options(self) -> TrainOptions:
        return TrainOptions(threads=self.threads)


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True) + "\n"


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def save_model(path: str, model: SvmModel, stats: NormalizationStats,
               config: RunConfig, provenance: dict) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "config": config.to_dict(),
        "normalization": {"mean": stats.mean.tolist(), "stddev": stats.stddev.tolist()},
        "model": {
            "c": model.params.c,
            "gamma": model.params.gamma,
            "bias": model.bias,
            "sv_points": model.sv_points.tolist(),
            "sv_coef": model.sv_coef.tolist(),
            "n_sv": model.n_sv,
            "level": model.level,
            "converged": model.converged,
            "quality": model.quality.as_dict() if model.quality else None,
        },
        "provenance": provenance,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_canonical_json(payload))


def load_model(path: str):
    """Load a saved model file; returns (model, stats, config, provenance)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from None
    try:
        if payload["format_version"] != MODEL_FORMAT_VERSION:
            raise DataError(f"{path}: unsupported model format version "
                            f"{payload['format_version']}")
        stats = NormalizationStats(np.asarray(payload["normalization"]["mean"]),
                                   np.asarray(payload["normalization"]["stddev"]))
        raw = payload["model"]
        sv_points = np.asarray(raw["sv_points"], dtype=np.float64)
        sv_coef = np.asarray(raw["sv_coef"], dtype=np.float64)
        if sv_points.ndim != 2 or sv_points.shape[0] != sv_coef.shape[0]:
            raise DataError(f"{path}: inconsistent support-vector payload")
        quality = QualityMetrics(**raw["quality"]) if raw.get("quality") else None
        model = SvmModel(sv_points=sv_points, sv_coef=sv_coef, bias=float(raw["bias"]),
                         params=SvmParams(float(raw["c"]), float(raw["gamma"])),
                         n_sv=int(raw["n_sv"]),
                         sv_indices=np.arange(sv_points.shape[0], dtype=np.int64),
                         sv_alpha=np.abs(sv_coef), converged=bool(raw["converged"]),
                         quality=quality, level=raw.get("level"))
        config = RunConfig.from_dict(payload["config"])
        return model, stats, config, payload.get("provenance", {})
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"corrupted model file {path}: {exc}") from None


def _validation_seed(seed: int, fold: int) -> int:
    return seed * 1_000_003 + 7919 * fold + 1


def _train_fold(ds: LabeledDataset, fold: int, plan, cfg: RunConfig, out_dir: str,
                trace_lines: list[str], dataset_sha: str) -> dict:
    train_fold = ds.subset(plan.train_rows(fold))
    test_fold = ds.subset(plan.test_rows(fold))
    train_norm, stats = zscore_normalize(train_fold)
    test_points = apply_normalization(test_fold.points, stats)

    sample = sample_validation(train_norm, cfg.val_min_ratio, cfg.val_maj_ratio,
                               seed=_validation_seed(cfg.seed, fold))
    validation = train_norm.subset(sample.rows)
    model_rows = np.setdiff1d(np.arange(train_norm.n), sample.rows)
    model_data = train_norm.subset(model_rows)

    pos_rows = model_data.class_rows(1)
    neg_rows = model_data.class_rows(-1)
    if pos_rows.size == 0 or neg_rows.size == 0:
        raise TrainingError(f"fold {fold}: a class vanished after validation sampling")
    pos_graph = build_knn_graph(model_data.points[pos_rows],
                                model_data.volumes[pos_rows], cfg.knn)
    neg_graph = build_knn_graph(model_data.points[neg_rows],
                                model_data.volumes[neg_rows], cfg.knn)
    if cfg.dump_graphs:
        dump_edges(pos_graph, os.path.join(out_dir, f"fold{fold}_pos.edges"))
        dump_edges(neg_graph, os.path.join(out_dir, f"fold{fold}_neg.edges"))

    hierarchy = build_hierarchy(model_data.points[pos_rows], pos_graph,
                                model_data.points[neg_rows], neg_graph,
                                cfg.coarsening_config())
    if cfg.dump_hierarchy:
        for row in hierarchy_trace(hierarchy):
            trace_lines.append(_json_line({"type": "hierarchy", "fold": fold, **row}))

    result = run_pipeline(hierarchy, validation, cfg.refinement_config(),
                          cfg.nud_config(), cfg.train_options())

    predicted, _ = predict(result.final_model, test_points)
    test_metrics = QualityMetrics.from_counts(*confusion_counts(predicted,
                                                                test_fold.labels))
    for row in result.report_rows:
        trace_lines.append(_json_line({"type": "level", "fold": fold, **row}))

    model_path = os.path.join(out_dir, f"model_fold{fold}.json")
    save_model(model_path, result.final_model, stats, cfg, {
        "fold": fold,
        "level": result.final_model.level,
        "dataset_sha256": dataset_sha,
    })
    return {
        "fold": fold,
        "final_level": result.final_model.level,
        "validation_gmean": result.final_model.quality.gmean,
        "n_sv": result.final_model.n_sv,
        **{k: getattr(test_metrics, k) for k in ("acc", "sn", "sp", "gmean")},
    }


def cmd_train(dataset_path: str, cfg: RunConfig, out_dir: str) -> int:
    cfg.validate()
    started = time.perf_counter()
    ds = load_dataset(dataset_path, cfg.fmt, label_col=cfg.label_col, header=cfg.header)
    plan = make_split_plan(ds, cfg.kfold, cfg.seed)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(_canonical_json(cfg.to_dict()))

    trace_lines = [_json_line({"type": "config", "config": cfg.to_dict()})]
    dataset_sha = _sha256(dataset_path)
    fold_rows = [_train_fold(ds, fold, plan, cfg, out_dir, trace_lines, dataset_sha)
                 for fold in range(cfg.kfold)]

    with open(os.path.join(out_dir, "trace.jsonl"), "w", encoding="utf-8") as fh:
        fh.writelines(trace_lines)

    means = {k: float(np.mean([row[k] for row in fold_rows]))
             for k in ("acc", "sn", "sp", "gmean")}
    summary = {"config": cfg.to_dict(), "dataset": os.path.basename(dataset_path),
               "dataset_sha256": dataset_sha, "folds": fold_rows,
               "mean": means}
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        fh.write(_canonical_json(summary))

    elapsed = time.perf_counter() - started
    with open(os.path.join(out_dir, "run_meta.json"), "w", encoding="utf-8") as fh:
        fh.write(_canonical_json({"wall_time_s": elapsed}))
    for row in fold_rows:
        print(f"fold {row['fold']}: test ACC={row['acc']:.4f} SN={row['sn']:.4f} "
              f"SP={row['sp']:.4f} G-mean={row['gmean']:.4f} (level {row['final_level']})")
    print(f"mean: ACC={means['acc']:.4f} SN={means['sn']:.4f} "
          f"SP={means['sp']:.4f} G-mean={means['gmean']:.4f}")
    print(f"wall time: {elapsed:.2f}s; outputs in {out_dir}")
    return EXIT_OK


def cmd_predict(model_path: str, dataset_path: str, out_path: str | None,
                fmt: str | None, label_col: int, header: bool,
                no_labels: bool) -> int:
    model, stats, config, _ = load_model(model_path)
    fmt = fmt or config.fmt
    labels = None
    if no_labels:
        if fmt != "csv":
            raise UsageError("--no-labels requires --format csv")
        points = load_points_csv(dataset_path, header=header)
    else:
        ds = load_dataset(dataset_path, fmt, label_col=label_col, header=header)
        points, labels = ds.points, ds.labels

    dim = stats.mean.shape[0]
    if points.shape[1] < dim and fmt == "libsvm":
        pad = np.zeros((points.shape[0], dim - points.shape[1]))
        points = np.hstack([points, pad])
    if points.shape[1] != dim:
        raise DataError(f"dataset has {points.shape[1]} features, model expects {dim}")

    predicted, values = predict(model, apply_normalization(points, stats))
    out_path = out_path or dataset_path + ".predictions.csv"
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "decision_value"])
        for lab, val in zip(predicted, values):
            writer.writerow([int(lab), repr(float(val))])
    print(f"wrote {predicted.size} predictions to {out_path}")

    if labels is not None:
        metrics = QualityMetrics.from_counts(*confusion_counts(predicted, labels))
        metrics_path = out_path + ".metrics.json"
        with open(metrics_path, "w", encoding="utf-8") as fh:
            fh.write(_canonical_json(metrics.as_dict()))
        print(f"ACC={metrics.acc:.4f} SN={metrics.sn:.4f} SP={metrics.sp:.4f} "
              f"G-mean={metrics.gmean:.4f} ({metrics_path})")
    return EXIT_OK


_REPORT_COLUMNS = ["level", "fold", "gmean", "sn", "sp", "n_sv", "recovered", "early_stop"]


def read_trace(path: str) -> list[dict]:
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: malformed trace line ({exc})") from None
                if record.get("type") == "level":
                    missing = [k for k in ("level", "fold") if k not in record]
                    if missing:
                        raise DataError(f"{path}:{lineno}: trace line missing {missing}")
                    rows.append(record)
    except OSError as exc:
        raise DataError(f"cannot read trace file {path}: {exc}") from None
    return rows


def cmd_report(trace_paths: list[str], out_path: str) -> int:
    rows: list[dict] = []
    for path in trace_paths:
        rows.extend(read_trace(path))
    if not rows:
        raise DataError("no level records found in the given trace files")
    rows.sort(key=lambda r: (r["level"], r["fold"]))
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_REPORT_COLUMNS)
        for row in rows:
            writer.writerow([row.get(col) for col in _REPORT_COLUMNS])

    stem, ext = os.path.splitext(out_path)
    levels_path = f"{stem}_levels{ext or '.csv'}"
    with open(levels_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "count", "gmean_mean", "gmean_min", "gmean_max",
                         "sn_mean", "sp_mean", "recovered_any", "early_stop_any"])
        for level in sorted({r["level"] for r in rows}):
            group = [r for r in rows if r["level"] == level]
            gmeans = [r["gmean"] for r in group if r.get("gmean") is not None]
            sns = [r["sn"] for r in group if r.get("sn") is not None]
            sps = [r["sp"] for r in group if r.get("sp") is not None]
            writer.writerow([
                level, len(group),
                float(np.mean(gmeans)) if gmeans else None,
                float(np.min(gmeans)) if gmeans else None,
                float(np.max(gmeans)) if gmeans else None,
                float(np.mean(sns)) if sns else None,
                float(np.mean(sps)) if sps else None,
                any(r.get("recovered") for r in group),
                any(r.get("early_stop") for r in group),
            ])
    print(f"wrote {out_path} ({len(rows)} rows) and {levels_path}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="multilevel-svm",
                     description="Multilevel weighted RBF-SVM training for "
                                 "imbalanced binary classification")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="k-fold training run")
    train.add_argument("dataset")
    train.add_argument("--out-dir", default="mlsvm_run")
    train.add_argument("--format", dest="fmt", default="libsvm", choices=["libsvm", "csv"])
    train.add_argument("--label-col", type=int, default=0)
    train.add_argument("--header", action="store_true")
    train.add_argument("--kfold", type=int, default=5)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--knn", type=int, default=10)
    train.add_argument("--coarsest-size", type=int, default=300)
    train.add_argument("--eta", type=float, default=2.0)
    train.add_argument("--q-seed", type=float, default=0.5)
    train.add_argument("--interp-order", type=int, default=2)
    train.add_argument("--theta", type=int, default=3000)
    train.add_argument("--delta", type=float, default=0.05)
    train.add_argument("--p", dest="p_neighbors", type=int, default=1)
    train.add_argument("--n", dest="n_neighbors", type=int, default=1)
    train.add_argument("--val-min-ratio", type=float, default=0.5)
    train.add_argument("--val-maj-ratio", type=float, default=0.1)
    train.add_argument("--log2c-range", type=float, nargs=2, default=[-5.0, 15.0],
                       metavar=("LO", "HI"))
    train.add_argument("--log2g-range", type=float, nargs=2, default=[-15.0, 3.0],
                       metavar=("LO", "HI"))
    train.add_argument("--nud-stage1", type=int, default=9)
    train.add_argument("--nud-stage2", type=int, default=4)
    train.add_argument("--no-recovery", action="store_true")
    train.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    train.add_argument("--dump-graphs", action="store_true")
    train.add_argument("--dump-hierarchy", action="store_true")

    pred = sub.add_parser("predict", help="predict with a saved model")
    pred.add_argument("model")
    pred.add_argument("dataset")
    pred.add_argument("--out")
    pred.add_argument("--format", dest="fmt", choices=["libsvm", "csv"])
    pred.add_argument("--label-col", type=int, default=0)
    pred.add_argument("--header", action="store_true")
    pred.add_argument("--no-labels", action="store_true")

    rep = sub.add_parser("report", help="flatten run traces into CSV quality tables")
    rep.add_argument("traces", nargs="+")
    rep.add_argument("--out", default="report.csv")
    return parser


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        fmt=args.fmt, label_col=args.label_col, header=args.header,
        kfold=args.kfold, seed=args.seed, knn=args.knn,
        coarsest_size=args.coarsest_size, eta=args.eta, q_seed=args.q_seed,
        interp_order=args.interp_order, theta=args.theta, delta=args.delta,
        p_neighbors=args.p_neighbors, n_neighbors=args.n_neighbors,
        val_min_ratio=args.val_min_ratio, val_maj_ratio=args.val_maj_ratio,
        log2c_range=tuple(args.log2c_range), log2g_range=tuple(args.log2g_range),
        nud_stage1=args.nud_stage1, nud_stage2=args.nud_stage2,
        recovery=not args.no_recovery, threads=args.threads,
        dump_graphs=args.dump_graphs, dump_hierarchy=args.dump_hierarchy,
    ).validate()


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "train":
            return cmd_train(args.dataset, _config_from_args(args), args.out_dir)
        if args.command == "predict":
            return cmd_predict(args.model, args.dataset, args.out, args.fmt,
                               args.label_col, args.header, args.no_labels)
        return cmd_report(args.traces, args.out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAIN


if __name__ == "__main__":
    sys.exit(main())
