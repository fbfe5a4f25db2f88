import math

import numpy as np
import pytest

from multilevel_svm.data_io import LabeledDataset
from multilevel_svm.svm_solver import (SvmParams, TrainingError, decision_values,
                                       instance_box, predict, squared_distances,
                                       train_wsvm)

from qp_oracle import (kernel_matrix_loops, oracle_bias, oracle_decision,
                       solve_dual_pg)


def dataset(points, labels, volumes=None):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    labels = np.asarray(labels)
    volumes = np.ones(len(labels)) if volumes is None else np.asarray(volumes, float)
    return LabeledDataset(points, labels, volumes, np.arange(len(labels)))


def random_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 26))
    dim = int(rng.integers(1, 4))
    points = rng.normal(size=(n, dim))
    labels = np.where(rng.random(n) < 0.5, 1, -1)
    labels[0], labels[1] = 1, -1  # force both classes
    volumes = rng.uniform(0.5, 3.0, n)
    c = float(2.0 ** rng.uniform(-1.0, 4.5))
    gamma = float(2.0 ** rng.uniform(-4.0, 2.0))
    return dataset(points, labels, volumes), SvmParams(c, gamma)


class TestInstanceBox:
    def test_unit_volumes_split_budget(self):
        u = instance_box(np.ones(4), np.array([1, 1, -1, -1]), c=10.0)
        np.testing.assert_allclose(u, [5.0, 5.0, 5.0, 5.0])

    def test_single_point_class_gets_full_budget(self):
        u = instance_box(np.ones(3), np.array([1, -1, -1]), c=7.0)
        assert u[0] == pytest.approx(7.0)

    def test_volume_proportional(self):
        u = instance_box(np.array([1.0, 3.0, 1.0]), np.array([1, 1, -1]), c=4.0)
        np.testing.assert_allclose(u, [1.0, 3.0, 4.0])

    def test_scaling_invariance(self):
        volumes = np.array([1.0, 3.0, 2.0, 2.0])
        labels = np.array([1, 1, -1, -1])
        a = instance_box(volumes, labels, 5.0)
        b = instance_box(4.0 * volumes, labels, 5.0)
        assert np.array_equal(a, b)


class TestClosedForm:
    def test_two_point_symmetric_instance(self):
        ds = dataset([-1.0, 1.0], [-1, 1])
        model = train_wsvm(ds, SvmParams(c=1000.0, gamma=1.0))
        expected_alpha = 1.0 / (1.0 - math.exp(-4.0))
        np.testing.assert_allclose(model.sv_alpha, expected_alpha, rtol=1e-6)
        assert model.bias == pytest.approx(0.0, abs=1e-9)
        labels, values = predict(model, np.array([[0.0]]))
        assert values[0] == pytest.approx(0.0, abs=1e-12)
        assert labels[0] == 1  # sign(0) maps to +1

    def test_xor_all_support_vectors(self):
        points = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
        labels = np.array([1, 1, -1, -1])
        model = train_wsvm(dataset(points, labels), SvmParams(c=100.0, gamma=1.0),
                           tol=1e-10)
        assert model.n_sv == 4
        assert np.ptp(model.sv_alpha) == pytest.approx(0.0, abs=1e-8)
        got, _ = predict(model, points)
        assert np.array_equal(got, labels)

    def test_margin_point_predicts_own_label(self, rng):
        points = rng.normal(size=(30, 2))
        labels = np.where(points[:, 0] + 0.3 * rng.normal(size=30) > 0, 1, -1)
        labels[:2] = [1, -1]
        ds = dataset(points, labels)
        model = train_wsvm(ds, SvmParams(c=50.0, gamma=0.5), tol=1e-8)
        bounds = instance_box(ds.volumes, ds.labels, 50.0)[model.sv_indices]
        free = (model.sv_alpha > 1e-8) & (bounds - model.sv_alpha > 1e-8)
        assert free.any()
        sv_labels, _ = predict(model, model.sv_points[free])
        expected = np.sign(model.sv_coef[free]).astype(np.int64)
        # free SVs sit on their margin, so prediction recovers their label
        assert np.array_equal(sv_labels, expected)


class TestDualFeasibility:
    @pytest.mark.parametrize("seed", range(12))
    def test_constraints_on_random_instances(self, seed):
        ds, params = random_instance(seed)
        model = train_wsvm(ds, params)
        y_sv = np.sign(model.sv_coef)
        assert abs(float(model.sv_alpha @ y_sv)) <= 1e-8
        bounds = instance_box(ds.volumes, ds.labels, params.c)
        assert np.all(model.sv_alpha >= 0.0)
        assert np.all(model.sv_alpha <= bounds[model.sv_indices] * (1 + 1e-10) + 1e-12)
        assert model.converged

    def test_nsv_counts_positive_alphas(self):
        ds, params = random_instance(99)
        model = train_wsvm(ds, params)
        assert model.n_sv == model.sv_alpha.size
        assert np.all(model.sv_alpha > 1e-12)


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(25))
    def test_dual_objective_and_grid_predictions(self, seed):
        ds, params = random_instance(seed + 1000)
        model = train_wsvm(ds, params, tol=1e-8)
        kernel = kernel_matrix_loops(ds.points, params.gamma)
        upper = instance_box(ds.volumes, ds.labels, params.c)
        alpha, obj = solve_dual_pg(kernel, ds.labels.astype(float), upper)
        assert model.dual_objective == pytest.approx(obj, abs=1e-3)

        rng = np.random.default_rng(seed)
        lo, hi = ds.points.min() - 0.5, ds.points.max() + 0.5
        grid = rng.uniform(lo, hi, size=(100, ds.dim))
        bias = oracle_bias(kernel, ds.labels.astype(float), upper, alpha)
        oracle_values = oracle_decision(grid, ds.points, ds.labels.astype(float),
                                        alpha, bias, params.gamma)
        got, _ = predict(model, grid)
        assert np.array_equal(got, np.where(oracle_values >= 0, 1, -1))


class TestSymmetries:
    def test_label_flip_negates_decisions_exactly(self, rng):
        points = rng.normal(size=(24, 2))
        labels = np.where(rng.random(24) < 0.5, 1, -1)
        labels[:2] = [1, -1]
        volumes = np.ones(24)
        params = SvmParams(c=8.0, gamma=0.7)
        model = train_wsvm(dataset(points, labels, volumes), params)
        flipped = train_wsvm(dataset(points, -labels, volumes), params)
        grid = rng.normal(size=(50, 2))
        assert np.max(np.abs(decision_values(model, grid)
                             + decision_values(flipped, grid))) <= 1e-9

    def test_volume_scaling_leaves_model_unchanged(self, rng):
        points = rng.normal(size=(20, 2))
        labels = np.where(rng.random(20) < 0.4, 1, -1)
        labels[:2] = [1, -1]
        volumes = rng.uniform(0.5, 2.0, 20)
        params = SvmParams(c=5.0, gamma=1.0)
        base = train_wsvm(dataset(points, labels, volumes), params)
        scaled = train_wsvm(dataset(points, labels, 4.0 * volumes), params)
        assert np.array_equal(base.sv_alpha, scaled.sv_alpha)
        assert base.bias == scaled.bias
        # a non-dyadic factor perturbs the bounds by 1 ulp, so the two runs
        # only agree to the solver's KKT tolerance
        loose = train_wsvm(dataset(points, labels, 3.0 * volumes), params)
        grid = rng.normal(size=(40, 2))
        np.testing.assert_allclose(decision_values(base, grid),
                                   decision_values(loose, grid), atol=5e-3)

    def test_deterministic(self, rng):
        ds, params = random_instance(4321)
        a = train_wsvm(ds, params)
        b = train_wsvm(ds, params)
        assert np.array_equal(a.sv_alpha, b.sv_alpha)
        assert a.bias == b.bias

    def test_shared_sqdist_matches_on_demand(self, rng):
        ds, params = random_instance(77)
        sq = squared_distances(ds.points, ds.points)
        a = train_wsvm(ds, params)
        b = train_wsvm(ds, params, sqdist=sq)
        grid = rng.normal(size=(30, ds.dim))
        np.testing.assert_allclose(decision_values(a, grid),
                                   decision_values(b, grid), atol=1e-9)


class TestErrorsAndEdges:
    def test_single_class_rejected(self):
        ds = dataset([[0.0], [1.0]], [1, 1])
        with pytest.raises(TrainingError):
            train_wsvm(ds, SvmParams(1.0, 1.0))

    def test_iteration_cap_sets_warning_flag(self, rng):
        points = rng.normal(size=(40, 2))
        labels = np.where(rng.random(40) < 0.5, 1, -1)
        labels[:2] = [1, -1]
        model = train_wsvm(dataset(points, labels), SvmParams(10.0, 1.0), max_iter=3)
        assert not model.converged

    def test_dimension_mismatch_rejected(self):
        ds = dataset([[0.0, 1.0], [1.0, 0.0]], [1, -1])
        model = train_wsvm(ds, SvmParams(1.0, 1.0))
        with pytest.raises(ValueError, match="features"):
            predict(model, np.zeros((3, 5)))

    def test_empty_query(self):
        ds = dataset([[0.0], [1.0]], [1, -1])
        model = train_wsvm(ds, SvmParams(1.0, 1.0))
        labels, values = predict(model, np.zeros((0, 1)))
        assert labels.size == 0 and values.size == 0
