"""Solver correctness: standardization, Lasso KKT and closed forms, logistic
gradients against finite differences, grids, prediction, serialization."""

import math

import numpy as np
import pytest

from vqdprobe import linmod
from vqdprobe.corpus import Dimension
from vqdprobe.linmod import (
    DimMismatch,
    ProbeModel,
    SingleClass,
    Standardizer,
    Task,
    TooFewRows,
    TrainMeta,
    fit_standardizer,
    lambda_grid,
    lasso_fit,
    lasso_kkt_violation,
    lasso_lambda_max,
    lasso_objective,
    lasso_path,
    load_model,
    logistic_fit,
    logistic_gradient,
    logistic_objective,
    predict,
    save_model,
)


def standardized(X):
    return fit_standardizer(X).transform(X)


def soft(z, g):
    return math.copysign(max(abs(z) - g, 0.0), z)


class TestStandardizer:
    def test_constant_column_clamped(self):
        std = fit_standardizer(np.zeros((5, 1)))
        assert std.means[0] == 0.0
        assert std.stds[0] == linmod.STD_EPS
        assert np.all(std.transform(np.zeros((5, 1))) == 0.0)

    def test_two_point_column(self):
        std = fit_standardizer(np.array([[1.0], [3.0]]))
        assert std.means[0] == 2.0
        assert std.stds[0] == 1.0  # population std

    def test_transform_centers_and_scales(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((100, 5)) * 3.0 + 1.0
        Z = standardized(X)
        assert np.abs(Z.mean(axis=0)).max() < 1e-10
        assert np.abs(Z.std(axis=0) - 1.0).max() < 1e-6

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            fit_standardizer(np.ones((1, 3)))


def orthonormal_design(n, d, seed):
    """Centered columns with x_j . x_k / n = delta_jk."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    A -= A.mean(axis=0)
    Q, _ = np.linalg.qr(A)
    return Q * math.sqrt(n)


class TestLasso:
    def test_lambda_max_kills_all_weights(self):
        rng = np.random.default_rng(0)
        X = standardized(rng.standard_normal((50, 6)))
        y = rng.standard_normal(50) * 2 + 3
        lam_max = lasso_lambda_max(X, y)
        for lam in (lam_max, lam_max * 1.5):
            fit = lasso_fit(X, y, lam)
            assert np.all(fit.weights == 0.0)
            assert fit.intercept == y.mean()

    def test_univariate_unpenalized_is_ols(self):
        rng = np.random.default_rng(1)
        X = standardized(rng.standard_normal((40, 1)))
        y = 2.0 * X[:, 0] + rng.standard_normal(40)
        fit = lasso_fit(X, y, 0.0)
        assert fit.weights[0] == pytest.approx(float(X[:, 0] @ y) / 40, abs=1e-12)

    def test_orthonormal_closed_form(self):
        n, lam = 60, 0.1
        X = orthonormal_design(n, 2, seed=5)
        rng = np.random.default_rng(6)
        y = 0.8 * X[:, 0] - 0.05 * X[:, 1] + 0.3 * rng.standard_normal(n)
        fit = lasso_fit(X, y, lam)
        yc = y - y.mean()
        for j in range(2):
            expected = soft(float(X[:, j] @ yc) / n, lam)
            assert fit.weights[j] == pytest.approx(expected, abs=1e-8)

    def test_kkt_on_random_problems(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(20, 100))
            d = int(rng.integers(3, 12))
            X = standardized(rng.standard_normal((n, d)))
            y = X @ rng.standard_normal(d) + rng.standard_normal(n)
            lam = float(rng.uniform(0.01, 0.5))
            fit = lasso_fit(X, y, lam)
            assert lasso_kkt_violation(X, y, fit.weights, fit.intercept, lam) <= 1e-4

    def test_objective_non_increasing_per_sweep(self):
        rng = np.random.default_rng(8)
        X = standardized(rng.standard_normal((80, 10)))
        y = X @ rng.standard_normal(10) + rng.standard_normal(80)
        trace = []
        lasso_fit(X, y, 0.05, objective_trace=trace)
        diffs = np.diff(trace)
        assert (diffs <= 1e-12).all()

    def test_warm_path_matches_cold_objectives(self):
        rng = np.random.default_rng(9)
        X = standardized(rng.standard_normal((60, 8)))
        y = X @ rng.standard_normal(8) + 0.5 * rng.standard_normal(60)
        grid = lambda_grid(X, y, Task.REGRESSION, size=12)
        warm = lasso_path(X, y, grid)
        for lam, w_fit in zip(grid, warm):
            cold = lasso_fit(X, y, float(lam))
            obj_w = lasso_objective(X, y, w_fit.weights, w_fit.intercept, float(lam))
            obj_c = lasso_objective(X, y, cold.weights, cold.intercept, float(lam))
            assert abs(obj_w - obj_c) <= 1e-8

    def test_intercept_is_mean_residual(self):
        rng = np.random.default_rng(10)
        X = standardized(rng.standard_normal((50, 4)))
        y = X @ np.array([1.0, -1.0, 0.0, 0.5]) + 2.0 + 0.1 * rng.standard_normal(50)
        fit = lasso_fit(X, y, 0.02)
        assert fit.intercept == pytest.approx(float((y - X @ fit.weights).mean()), abs=1e-12)

    def test_negative_lambda_rejected(self):
        with pytest.raises(linmod.LinmodError):
            lasso_fit(np.zeros((3, 2)), np.zeros(3), -0.1)

    def test_predictions_invariant_to_training_row_order(self):
        rng = np.random.default_rng(30)
        X = standardized(rng.standard_normal((60, 5)))
        y = X @ rng.standard_normal(5) + 0.2 * rng.standard_normal(60)
        perm = rng.permutation(60)
        fit_a = lasso_fit(X, y, 0.05)
        fit_b = lasso_fit(X[perm], y[perm], 0.05)
        X_new = rng.standard_normal((10, 5))
        pred_a = X_new @ fit_a.weights + fit_a.intercept
        pred_b = X_new @ fit_b.weights + fit_b.intercept
        assert np.abs(pred_a - pred_b).max() < 1e-4  # same optimum up to solver tolerance


class TestLambdaGrid:
    def test_length_and_strictly_decreasing(self):
        rng = np.random.default_rng(11)
        X = standardized(rng.standard_normal((30, 4)))
        y = rng.standard_normal(30)
        for task in (Task.REGRESSION, Task.CLASSIFICATION):
            grid = lambda_grid(X, y, task)
            assert len(grid) == 50
            assert (np.diff(grid) < 0).all()

    def test_first_element_zero_solution(self):
        rng = np.random.default_rng(12)
        X = standardized(rng.standard_normal((40, 5)))
        y = X @ rng.standard_normal(5) + rng.standard_normal(40)
        grid = lambda_grid(X, y, Task.REGRESSION)
        fit = lasso_fit(X, y, float(grid[0]))
        assert np.all(fit.weights == 0.0)

    def test_log_spacing_constant_ratio(self):
        rng = np.random.default_rng(13)
        X = standardized(rng.standard_normal((30, 4)))
        y = rng.standard_normal(30)
        grid = lambda_grid(X, y, Task.REGRESSION)
        ratios = grid[1:] / grid[:-1]
        assert np.abs(ratios - ratios[0]).max() < 1e-12

    def test_classification_anchor(self):
        grid = lambda_grid(np.zeros((10, 2)), np.zeros(10), Task.CLASSIFICATION)
        assert grid[0] == 1.0
        assert grid[-1] == pytest.approx(1e-3, rel=1e-12)


def fd_gradient(X, y, w, b, lam, h=1e-5):
    """Central finite differences of the logistic objective."""
    theta = np.append(w, b)
    out = np.empty_like(theta)
    for j in range(len(theta)):
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += h
        tm[j] -= h
        fp = logistic_objective(X, y, tp[:-1], tp[-1], lam)
        fm = logistic_objective(X, y, tm[:-1], tm[-1], lam)
        out[j] = (fp - fm) / (2 * h)
    return out


class TestLogistic:
    def test_zero_features_recovers_logit_base_rate(self):
        y = np.array([1.0, 0, 0, 0, 1, 0, 0, 1, 0, 0])
        fit = logistic_fit(np.zeros((10, 3)), y, 0.1)
        assert np.abs(fit.weights).max() < 1e-9
        assert fit.intercept == pytest.approx(math.log(0.3 / 0.7), abs=1e-5)

    def test_single_class_rejected(self):
        with pytest.raises(SingleClass):
            logistic_fit(np.zeros((5, 2)), np.ones(5), 0.1)

    def test_nonpositive_lambda_rejected(self):
        y = np.array([0.0, 1.0, 0.0, 1.0])
        with pytest.raises(linmod.LinmodError):
            logistic_fit(np.zeros((4, 1)), y, 0.0)

    def test_separable_problem_gradient_certificates(self):
        rng = np.random.default_rng(14)
        X = standardized(rng.standard_normal((40, 3)))
        y = (X @ np.array([2.0, -1.0, 0.5]) > 0).astype(float)
        fit = logistic_fit(X, y, 0.1)
        analytic = logistic_gradient(X, y, fit.weights, fit.intercept, 0.1)
        assert np.linalg.norm(analytic) <= 1e-6
        fd = fd_gradient(X, y, fit.weights, fit.intercept, 0.1)
        assert np.linalg.norm(fd) <= 1e-5  # independent near-zero certificate
        assert np.abs(fd - analytic).max() <= 1e-6

    def test_gradient_matches_fd_at_random_points(self):
        rng = np.random.default_rng(15)
        X = standardized(rng.standard_normal((30, 4)))
        y = (rng.random(30) < 0.4).astype(float)
        for _ in range(5):
            w = rng.standard_normal(4)
            b = float(rng.standard_normal())
            an = logistic_gradient(X, y, w, b, 0.2)
            fd = fd_gradient(X, y, w, b, 0.2)
            assert np.abs(an - fd).max() <= 1e-4 * max(1.0, float(np.abs(fd).max()))

    def test_warm_start_path_converges_everywhere(self):
        rng = np.random.default_rng(16)
        X = standardized(rng.standard_normal((60, 5)))
        y = (X @ rng.standard_normal(5) + 0.3 * rng.standard_normal(60) > 0).astype(float)
        grid = lambda_grid(X, y, Task.CLASSIFICATION, size=10)
        for lam, fit in zip(grid, linmod.logistic_path(X, y, grid)):
            g = logistic_gradient(X, y, fit.weights, fit.intercept, float(lam))
            assert np.linalg.norm(g) <= 1e-6


def toy_model(task=Task.REGRESSION, weights=(0.0, 0.0), intercept=1.5, threshold=None):
    d = len(weights)
    return ProbeModel(
        task=task,
        weights=np.array(weights, dtype=float),
        intercept=intercept,
        lam=0.1,
        standardizer=Standardizer(means=np.zeros(d), stds=np.ones(d)),
        dimension=Dimension.MONOPITCH,
        backend_name="testbk",
        train_meta=TrainMeta(n_train=10, seed=0, solver_iterations=3),
        binarization_threshold=threshold,
    )


class TestPredict:
    def test_zero_weight_constant_output(self):
        X = np.random.default_rng(17).standard_normal((6, 2))
        reg = predict(toy_model(), X)
        assert np.all(reg == 1.5)
        clf = predict(toy_model(Task.CLASSIFICATION, threshold=4), X)
        assert np.allclose(clf, 1 / (1 + math.exp(-1.5)))

    def test_classification_output_in_unit_interval(self):
        # scores kept below the float64 sigmoid saturation point
        X = np.random.default_rng(18).standard_normal((50, 2)) * 3
        probs = predict(toy_model(Task.CLASSIFICATION, weights=(3.0, -2.0), threshold=3), X)
        assert ((probs > 0) & (probs < 1)).all()

    def test_monotone_in_positive_weight_feature(self):
        model = toy_model(weights=(2.0, 0.0))
        lo = predict(model, np.array([[1.0, 0.0]]))[0]
        hi = predict(model, np.array([[2.0, 0.0]]))[0]
        assert hi > lo

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            predict(toy_model(), np.zeros((3, 5)))

    def test_training_rows_reproduce_objective(self):
        rng = np.random.default_rng(19)
        X = rng.standard_normal((40, 3)) * 2 + 1
        std = fit_standardizer(X)
        Z = std.transform(X)
        y = Z @ np.array([1.0, 0.0, -0.5]) + 3.0 + 0.1 * rng.standard_normal(40)
        fit = lasso_fit(Z, y, 0.05)
        model = ProbeModel(
            task=Task.REGRESSION,
            weights=fit.weights,
            intercept=fit.intercept,
            lam=0.05,
            standardizer=std,
            dimension=Dimension.BREATHINESS,
            backend_name="testbk",
            train_meta=TrainMeta(n_train=40, seed=0, solver_iterations=fit.n_iter),
        )
        preds = predict(model, X)
        direct = lasso_objective(Z, y, fit.weights, fit.intercept, 0.05)
        via_preds = float(((y - preds) ** 2).sum()) / 80 + 0.05 * float(np.abs(fit.weights).sum())
        assert via_preds == pytest.approx(direct, rel=1e-12)


class TestModelSerialization:
    def test_json_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(20)
        std = Standardizer(means=rng.standard_normal(4), stds=np.abs(rng.standard_normal(4)) + 0.5)
        model = ProbeModel(
            task=Task.CLASSIFICATION,
            weights=rng.standard_normal(4),
            intercept=float(rng.standard_normal()),
            lam=0.0123456789012345678,
            standardizer=std,
            dimension=Dimension.HARSH_VOICE,
            backend_name="hubert-large",
            train_meta=TrainMeta(n_train=123, seed=42, solver_iterations=17),
            binarization_threshold=3,
        )
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        assert back.task == model.task
        assert back.lam == model.lam
        assert back.intercept == model.intercept
        assert np.array_equal(back.weights, model.weights)
        assert np.array_equal(back.standardizer.means, model.standardizer.means)
        assert np.array_equal(back.standardizer.stds, model.standardizer.stds)
        assert back.binarization_threshold == 3
        assert back.train_meta == model.train_meta

    def test_classification_requires_threshold(self):
        with pytest.raises(linmod.LinmodError):
            toy_model(Task.CLASSIFICATION, threshold=None)
