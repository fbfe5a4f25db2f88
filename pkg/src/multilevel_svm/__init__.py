"""Multilevel weighted RBF-SVM training for large imbalanced binary datasets.

The pipeline builds per-class k-NN proximity graphs, coarsens them with
algebraic-multigrid aggregation into a level hierarchy, trains a weighted SVM
at the coarsest level with a nested uniform-design parameter search, and
refines back up the hierarchy while detecting and recovering
classification-quality drops.
"""

from .coarsening import (ClassLevel, CoarseningConfig, FutureVolumes,
                         HierarchyLevel, InterpolationOperator, LevelHierarchy,
                         SeedPartition, build_hierarchy, build_interpolation,
                         coarsen_graph, coarsen_points, compute_future_volumes,
                         select_seeds)
from .data_io import (DataError, LabeledDataset, NormalizationStats, SplitPlan,
                      ValidationSample, apply_normalization, load_dataset,
                      make_split_plan, sample_validation, zscore_normalize)
from .knn_graph import ProximityGraph, build_knn_graph, graph_from_edges
from .model_eval import QualityMetrics, confusion_counts, evaluate, select_best
from .param_fit import NudConfig, NudResult, TrainOptions, nud_candidates, nud_search
from .recovery import RecoveryState, detect_and_recover
from .refinement import (LevelSolution, PipelineResult, RefinementConfig,
                         disaggregate, refine_level, run_pipeline)
from .svm_solver import (SvmModel, SvmParams, TrainingError, instance_box,
                         predict, rbf_kernel, train_wsvm)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
