import json

import numpy as np
import pytest
import scipy.sparse as sp

from multilevel_svm.coarsening import (ClassLevel, HierarchyLevel,
                                       InterpolationOperator, LevelHierarchy)
from multilevel_svm.data_io import LabeledDataset
from multilevel_svm.knn_graph import build_knn_graph
from multilevel_svm.param_fit import NudConfig, TrainOptions, nud_search
from multilevel_svm.refinement import (LevelSolution, RefinementConfig,
                                       disaggregate, level_training_set,
                                       refine_level, run_pipeline, split_sv_rows)
from multilevel_svm.recovery import RecoveryState

from conftest import make_blobs

# pinned single-candidate search: C = 8, gamma = 0.5 at every level
PINNED = NudConfig(log2c_range=(3.0, 3.0), log2g_range=(-1.0, -1.0),
                   stage1_count=1, stage2_count=0)
OPTS = TrainOptions()

FINE_POS = np.array([[0.0, 1.0], [0.2, 1.1], [-0.2, 0.9], [0.1, 0.8], [-0.1, 1.2],
                     [4.0, 0.8], [4.1, 0.9], [3.9, 0.85]])
FINE_NEG = np.array([[0.0, -1.0], [0.2, -1.1], [-0.2, -0.9], [0.1, -0.8],
                     [-0.1, -1.2], [4.0, -1.0]])
COARSE_POS = np.array([[0.0, 1.0], [0.1, 1.0], [4.0, 1.0], [0.05, 1.05]])
COARSE_NEG = np.array([[0.0, -1.0], [4.0, -1.0]])
VAL_POINTS = np.array([[0.0, 0.6], [4.0, 0.5], [0.0, -0.6], [4.0, -0.5]])
VAL_LABELS = np.array([1, 1, -1, -1])


def _class_level(points, volumes, interp=None):
    graph = build_knn_graph(points, volumes, k=2)
    return ClassLevel(points, graph, interp)


def _interp(rows_to_col, n_fine, n_coarse, seeds):
    cols = np.array([rows_to_col[r] for r in range(n_fine)])
    matrix = sp.coo_matrix((np.ones(n_fine), (np.arange(n_fine), cols)),
                           shape=(n_fine, n_coarse)).tocsr()
    return InterpolationOperator(matrix, np.asarray(seeds))


def drop_hierarchy():
    """Two-level instance: the coarse level classifies the validation set
    perfectly, but the x=4 positive support disaggregates into cluster-A rows,
    so the fine level drops; the hidden cluster (rows 5-7) hides behind the
    non-support coarse point and recovery can pull it back in.
    """
    p_pos = _interp({0: 0, 1: 0, 2: 0, 3: 1, 4: 2, 5: 3, 6: 3, 7: 3},
                    8, 4, seeds=[0, 3, 4, 5])
    p_neg = _interp({0: 0, 1: 0, 2: 0, 3: 0, 4: 0, 5: 1}, 6, 2, seeds=[0, 5])
    fine = HierarchyLevel(_class_level(FINE_POS, np.ones(8)),
                          _class_level(FINE_NEG, np.ones(6)))
    coarse = HierarchyLevel(
        _class_level(COARSE_POS, np.array([3.0, 1.0, 1.0, 3.0]), p_pos),
        _class_level(COARSE_NEG, np.array([5.0, 1.0]), p_neg))
    return LevelHierarchy([fine, coarse])


def validation_set():
    return LabeledDataset(VAL_POINTS, VAL_LABELS, np.ones(4), np.arange(4))


class TestTrainingSetAssembly:
    def test_level_training_set_layout(self):
        level = drop_hierarchy().levels[0]
        train = level_training_set(level, np.array([0, 2]), np.array([1, 5]))
        assert train.n == 4
        assert list(train.labels) == [1, 1, -1, -1]
        np.testing.assert_allclose(train.points[0], FINE_POS[0])
        np.testing.assert_allclose(train.points[3], FINE_NEG[5])

    def test_split_sv_rows_roundtrip(self):
        level = drop_hierarchy().levels[0]
        pos_rows, neg_rows = np.array([1, 3, 5]), np.array([0, 4])
        train = level_training_set(level, pos_rows, neg_rows)

        class FakeModel:
            sv_indices = np.array([0, 2, 3])
        pos_sv, neg_sv = split_sv_rows(FakeModel, pos_rows, neg_rows)
        assert list(pos_sv) == [1, 5]
        assert list(neg_sv) == [0]
        del train


class TestDisaggregate:
    def test_empty_support_set(self):
        interp = drop_hierarchy().levels[1].pos.interp
        assert disaggregate(np.array([], dtype=int), interp).size == 0

    def test_full_cover_when_every_point_is_support(self):
        interp = drop_hierarchy().levels[1].pos.interp
        rows = disaggregate(np.arange(4), interp)
        assert np.array_equal(rows, np.arange(8))

    def test_single_aggregate(self):
        interp = drop_hierarchy().levels[1].pos.interp
        assert np.array_equal(disaggregate(np.array([3]), interp),
                              np.array([5, 6, 7]))


class TestPipeline:
    def test_single_level_equals_plain_search(self, rng):
        points, labels = make_blobs(rng, n_pos=25, n_neg=50)
        pos, neg = points[labels == 1], points[labels == -1]
        hierarchy = LevelHierarchy([HierarchyLevel(
            _class_level(pos, np.ones(len(pos))),
            _class_level(neg, np.ones(len(neg))))])
        val = validation_set()
        cfg = NudConfig(log2c_range=(-2.0, 4.0), log2g_range=(-4.0, 0.0))
        result = run_pipeline(hierarchy, val, RefinementConfig(), cfg, OPTS)
        train = level_training_set(hierarchy.levels[0],
                                   np.arange(len(pos)), np.arange(len(neg)))
        direct = nud_search(train, val, None, cfg, OPTS, level=1)
        assert result.final_log == direct.best_log
        assert result.final_model.quality.gmean == direct.best_model.quality.gmean

    def test_drop_is_recovered(self):
        result = run_pipeline(drop_hierarchy(), validation_set(),
                              RefinementConfig(theta=600, delta=0.05), PINNED, OPTS)
        coarse_row, fine_row = result.report_rows
        assert coarse_row["level"] == 2 and fine_row["level"] == 1
        assert coarse_row["gmean"] == pytest.approx(1.0)
        assert fine_row["recovered"] is True
        assert fine_row["gmean"] == pytest.approx(1.0)
        assert fine_row["recovery"]["q_before"] == pytest.approx(0.7071, abs=1e-3)
        assert 5 in result.solutions[1].pos_rows

    def test_recovery_off_leaves_drop(self):
        result = run_pipeline(drop_hierarchy(), validation_set(),
                              RefinementConfig(theta=600, recovery_enabled=False),
                              PINNED, OPTS)
        fine_row = result.report_rows[1]
        assert fine_row["recovered"] is False
        assert fine_row["gmean"] == pytest.approx(0.7071, abs=1e-3)
        # the cross-level selection still protects the final model
        assert result.final_model.quality.gmean == pytest.approx(1.0)

    def test_paired_runs_recovery_never_hurts(self):
        on = run_pipeline(drop_hierarchy(), validation_set(),
                          RefinementConfig(theta=600), PINNED, OPTS)
        off = run_pipeline(drop_hierarchy(), validation_set(),
                           RefinementConfig(theta=600, recovery_enabled=False),
                           PINNED, OPTS)
        assert on.final_model.quality.gmean >= off.final_model.quality.gmean
        for row_on, row_off in zip(on.report_rows, off.report_rows):
            if row_on["gmean"] is not None:
                assert row_on["gmean"] >= row_off["gmean"] - 1e-12

    def test_early_stop_blocks_finer_training(self):
        result = run_pipeline(drop_hierarchy(), validation_set(),
                              RefinementConfig(theta=10), PINNED, OPTS)
        assert len(result.solutions) == 2
        stop_row = result.report_rows[1]
        assert stop_row["early_stop"] is True
        assert stop_row["models_trained"] == 0
        assert stop_row["gmean"] is None
        assert result.final_model is result.solutions[0].best_model

    def test_final_model_is_a_level_best(self):
        result = run_pipeline(drop_hierarchy(), validation_set(),
                              RefinementConfig(theta=600), PINNED, OPTS)
        assert any(result.final_model is sol.best_model for sol in result.solutions)

    def test_exactly_one_quality_row_per_trained_level(self):
        result = run_pipeline(drop_hierarchy(), validation_set(),
                              RefinementConfig(theta=600), PINNED, OPTS)
        trained = [s for s in result.solutions if not s.early_stop]
        rows_with_quality = [r for r in result.report_rows if r["gmean"] is not None]
        assert len(rows_with_quality) == len(trained)
        assert len(result.report_rows) == len(result.solutions)

    def test_deterministic_reruns(self):
        a = run_pipeline(drop_hierarchy(), validation_set(),
                         RefinementConfig(theta=600), PINNED, OPTS)
        b = run_pipeline(drop_hierarchy(), validation_set(),
                         RefinementConfig(theta=600), PINNED, OPTS)
        assert json.dumps(a.report_rows, sort_keys=True) == \
               json.dumps(b.report_rows, sort_keys=True)


class TestCopyBranchContainment:
    def test_fine_quality_matches_coarse_on_identical_data(self, rng):
        # both classes copied: identity interpolation, same data at both levels,
        # tiny C so every point is a support vector and disaggregation returns
        # the full level
        points, labels = make_blobs(rng, n_pos=10, n_neg=12, spread=1.0, gap=1.0)
        pos, neg = points[labels == 1], points[labels == -1]
        eye_pos = InterpolationOperator(sp.identity(10, format="csr"), np.arange(10))
        eye_neg = InterpolationOperator(sp.identity(12, format="csr"), np.arange(12))
        fine = HierarchyLevel(_class_level(pos, np.ones(10)),
                              _class_level(neg, np.ones(12)))
        coarse = HierarchyLevel(_class_level(pos, np.ones(10), eye_pos),
                                _class_level(neg, np.ones(12), eye_neg))
        hierarchy = LevelHierarchy([fine, coarse])
        tiny_c = NudConfig(log2c_range=(-2.0, -2.0), log2g_range=(-1.0, -1.0),
                           stage1_count=1, stage2_count=0)
        result = run_pipeline(hierarchy, validation_set(),
                              RefinementConfig(theta=600, recovery_enabled=False),
                              tiny_c, OPTS)
        coarse_sol, fine_sol = result.solutions
        assert coarse_sol.best_model.n_sv == 22  # everything at the tiny bound
        assert np.array_equal(np.sort(fine_sol.pos_rows), np.arange(10))
        assert fine_sol.quality >= coarse_sol.quality - 1e-12

    def test_empty_class_fallback(self):
        hierarchy = drop_hierarchy()
        inherited = LevelSolution(
            level_index=1, spec_level=2, pos_rows=np.arange(4),
            neg_rows=np.arange(2), best_model=None, best_log=(3.0, -1.0),
            quality=1.0, models_trained=1, early_stop=False, recovery_event=None,
            pos_sv_rows=np.array([], dtype=int), neg_sv_rows=np.array([1]))
        state = RecoveryState(q_max=1.0)
        solution = refine_level(hierarchy, 0, inherited, validation_set(),
                                RefinementConfig(theta=600, recovery_enabled=False),
                                PINNED, OPTS, state)
        assert np.array_equal(solution.pos_rows, np.arange(8))
        assert np.array_equal(solution.neg_rows, np.array([5]))
