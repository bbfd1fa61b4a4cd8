import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from neighbourtext.errors import InputError
from neighbourtext.model import (
    CVResult,
    ConvergenceWarning,
    ElasticNetConfig,
    RegressionProblem,
    eval_objective,
    fit_elastic_net,
    monte_carlo_cv,
    predict,
    stratified_split,
    top_coefficients,
    write_cv_csv,
)

import enet_oracle

EXACT = ElasticNetConfig(0.0, 0.0, tol=1e-12)


def ols(X, y):
    A = np.column_stack([np.ones(len(y)), X])
    sol = np.linalg.lstsq(A, y, rcond=None)[0]
    return sol[0], sol[1:]


class TestObjective:
    def test_intercept_only_is_variance(self):
        y = np.array([1.0, 4.0, 2.0, 7.0])
        prob = RegressionProblem(np.zeros((4, 2)), y)
        assert eval_objective(prob, [0, 0], y.mean(), EXACT) == pytest.approx(np.var(y), abs=1e-15)

    def test_perfect_fit(self):
        X = np.arange(6.0).reshape(3, 2)
        y = X @ [1.5, -2.0] + 3
        assert eval_objective(RegressionProblem(X, y), [1.5, -2.0], 3.0, EXACT) == 0.0

    def test_matches_expression_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            X, y = rng.normal(size=(12, 3)), rng.normal(size=12)
            th, b = rng.normal(size=3), rng.normal()
            cfg = ElasticNetConfig(rng.random(), rng.random())
            want = sum((y[i] - b - sum(X[i, j] * th[j] for j in range(3))) ** 2 for i in range(12)) / 12
            want += cfg.lambda1 * sum(abs(t) for t in th) + cfg.lambda2 * sum(t * t for t in th)
            assert abs(eval_objective(RegressionProblem(X, y), th, b, cfg) - want) <= 1e-12


class TestFit:
    def test_y_equals_2x(self, backend):
        x = np.linspace(-1, 3, 9)[:, None]
        m = fit_elastic_net(RegressionProblem(x, 2 * x.ravel()), ElasticNetConfig(0, 0), backend)
        assert abs(m.theta[0] - 2.0) <= 1e-8 and abs(m.intercept) <= 1e-8

    def test_full_shrinkage(self, backend):
        rng = np.random.default_rng(1)
        X, y = rng.normal(size=(30, 4)), rng.normal(size=30)
        Z = enet_oracle.standardized(X)
        c = 2.0 / 30 * Z.T @ (y - y.mean())
        m = fit_elastic_net(RegressionProblem(X, y), ElasticNetConfig(float(np.abs(c).max()), 0.1), backend)
        assert_array_equal(m.theta, 0.0)
        assert m.intercept == pytest.approx(y.mean(), abs=1e-15)
        assert_allclose(predict(m, X), y.mean())

    @pytest.mark.parametrize("seed", range(12))
    def test_ols_limit(self, seed, backend):
        X, y, _, _, std = enet_oracle.random_instance(seed)
        m = fit_elastic_net(RegressionProblem(X, y), ElasticNetConfig(0, 0, tol=1e-12, standardize=std), backend)
        b, th = ols(X, y)
        assert np.abs(m.theta - th).max() <= 1e-8 and abs(m.intercept - b) <= 1e-8
        assert np.abs(predict(m, X) - (b + X @ th)).max() <= 1e-8

    @pytest.mark.parametrize("seed", range(12))
    def test_against_brute_force(self, seed, backend):
        X, y, l1, l2, std = enet_oracle.random_instance(seed)
        cfg = ElasticNetConfig(l1, l2, standardize=std)
        m = fit_elastic_net(RegressionProblem(X, y), cfg, backend)
        Z = enet_oracle.standardized(X, std)
        best, _ = enet_oracle.oracle_minimum(Z, y - y.mean(), l1, l2)
        assert enet_oracle.objective(Z, y - y.mean(), m.theta_std, l1, l2) <= best + 1e-6

    @pytest.mark.parametrize("seed", range(12))
    def test_objective_never_increases(self, seed, backend):
        X, y, l1, l2, std = enet_oracle.random_instance(seed)
        m = fit_elastic_net(RegressionProblem(X, y), ElasticNetConfig(l1, l2, standardize=std), backend)
        trace = m.objective_trace
        Z = enet_oracle.standardized(X, std)
        start = enet_oracle.objective(Z, y - y.mean(), np.zeros(X.shape[1]), l1, l2)
        assert trace[0] <= start + 1e-12
        assert np.all(np.diff(trace) <= 1e-12 * np.maximum(1.0, np.abs(trace[:-1])))

    def test_stationary_under_perturbation(self, backend):
        rng = np.random.default_rng(4)
        X, y = rng.normal(size=(40, 3)), rng.normal(size=40)
        cfg = ElasticNetConfig(0.05, 0.05, tol=1e-10, standardize=False)
        prob = RegressionProblem(X, y)
        m = fit_elastic_net(prob, cfg, backend)
        f0 = eval_objective(prob, m.theta, m.intercept, cfg)
        for j in range(3):
            for d in (1e-3, -1e-3, 1e-5, -1e-5):
                th = m.theta.copy()
                th[j] += d
                assert eval_objective(prob, th, m.intercept, cfg) >= f0 - 1e-12

    def test_working_objective_matches_original_without_standardizing(self):
        X, y, l1, l2, _ = enet_oracle.random_instance(3)
        cfg = ElasticNetConfig(l1, l2, standardize=False)
        prob = RegressionProblem(X, y)
        m = fit_elastic_net(prob, cfg)
        assert eval_objective(prob, m.theta, m.intercept, cfg) == pytest.approx(m.objective_trace[-1], rel=1e-10)

    def test_constant_column_stays_zero(self, backend):
        rng = np.random.default_rng(2)
        X = np.column_stack([rng.normal(size=20), np.full(20, 0.1)])
        m = fit_elastic_net(RegressionProblem(X, X[:, 0] * 3), ElasticNetConfig(0, 0), backend)
        assert m.theta[1] == 0.0

    def test_all_constant_design(self):
        m = fit_elastic_net(RegressionProblem(np.ones((10, 2)), np.arange(10.0)))
        assert_array_equal(m.theta, 0.0) and m.intercept == 4.5

    def test_non_convergence_warns(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 3))
        X[:, 1] = X[:, 0] + 1e-3 * rng.normal(size=30)
        with pytest.warns(ConvergenceWarning):
            m = fit_elastic_net(RegressionProblem(X, rng.normal(size=30)), ElasticNetConfig(0, 0, tol=1e-15, max_iter=3))
        assert not m.converged and m.sweeps == 3

    def test_standardization_invariance(self, backend):
        rng = np.random.default_rng(9)
        X, y = rng.normal(size=(50, 4)), rng.normal(size=50)
        cfg = ElasticNetConfig(0.05, 0.1, tol=1e-12)
        base = predict(fit_elastic_net(RegressionProblem(X, y), cfg, backend), X)
        X2 = X.copy()
        X2[:, 2] *= 37.5
        scaled = predict(fit_elastic_net(RegressionProblem(X2, y), cfg, backend), X2)
        assert np.abs(base - scaled).max() <= 1e-10

    def test_backends_agree(self):
        from neighbourtext import kernels

        backs = kernels.available_backends()
        if len(backs) < 2:
            pytest.skip("compiled kernels not built")
        X, y, l1, l2, std = enet_oracle.random_instance(17)
        fits = [fit_elastic_net(RegressionProblem(X, y), ElasticNetConfig(l1, l2, standardize=std), b) for b in backs.values()]
        assert_allclose(fits[0].theta, fits[1].theta, rtol=0, atol=1e-12)


class TestPredict:
    def test_zero_theta(self):
        m = fit_elastic_net(RegressionProblem(np.ones((5, 2)), [1.0, 2, 3, 4, 5]))
        assert_array_equal(predict(m, np.random.default_rng(0).normal(size=(3, 2))), 3.0)

    def test_exact_fit_round_trip(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(20, 3))
        y = X @ [1, -2, 0.5] + 4
        m = fit_elastic_net(RegressionProblem(X, y), EXACT)
        assert np.abs(predict(m, X) - y).max() <= 1e-8

    def test_dimension_mismatch(self):
        m = fit_elastic_net(RegressionProblem(np.eye(4), [1.0, 2, 3, 4]))
        with pytest.raises(InputError):
            predict(m, np.ones((2, 3)))


class TestSplit:
    def test_hundred_rows(self):
        y = np.random.default_rng(0).normal(size=100)
        train, test = stratified_split(y, 0.75, 10, np.random.default_rng(1))
        assert len(train) == 75 and len(test) == 25
        assert sorted(np.concatenate([train, test]).tolist()) == list(range(100))
        ranks = np.argsort(np.argsort(y))
        per_bin = np.bincount(ranks[train] // 10, minlength=10)
        assert set(per_bin.tolist()) <= {7, 8} and per_bin.sum() == 75

    def test_constant_y(self):
        train, test = stratified_split(np.ones(40), rng=np.random.default_rng(0))
        assert len(train) == 30 and len(test) == 10

    def test_seeds(self):
        y = np.arange(60.0)
        a = stratified_split(y, rng=np.random.default_rng(5))
        b = stratified_split(y, rng=np.random.default_rng(5))
        c = stratified_split(y, rng=np.random.default_rng(6))
        assert_array_equal(a[0], b[0])
        assert not np.array_equal(a[0], c[0])

    def test_too_small(self):
        with pytest.raises(InputError):
            stratified_split(np.arange(7.0))

    @pytest.mark.parametrize("n", [8, 9, 13, 39, 41, 57, 200, 201])
    def test_sizes(self, n):
        y = np.random.default_rng(n).integers(0, 5, size=n).astype(float)
        train, test = stratified_split(y, rng=np.random.default_rng(0))
        assert len(train) == int(np.floor(0.75 * n + 0.5))
        assert not set(train) & set(test) and len(train) + len(test) == n


class TestCV:
    def planted(self, n=100, noise=0.0, seed=0):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, 5))
        y = X @ [2, 0, -1, 0, 0.5] + 1 + noise * rng.normal(size=n)
        return RegressionProblem(X, y, tuple(f"u{i}" for i in range(n)), "a", ("aa", "bb", "cc", "dd", "ee"))

    def test_noiseless_limit(self):
        r = monte_carlo_cv(self.planted(), ElasticNetConfig(1e-9, 1e-9), folds=10, seed=0)
        assert r.mean_rho >= 0.999 and len(r.per_fold_rho) == 10

    def test_null(self):
        rng = np.random.default_rng(2024)
        prob = RegressionProblem(rng.normal(size=(200, 20)), rng.normal(size=200))
        r = monte_carlo_cv(prob, ElasticNetConfig(), folds=10, seed=0)
        assert abs(r.mean_rho) < 0.15

    def test_std_is_sample_std(self):
        r = monte_carlo_cv(self.planted(noise=3.0), ElasticNetConfig(0.01, 0.01), folds=5, seed=1)
        assert r.std_rho == pytest.approx(np.std(r.per_fold_rho, ddof=1), abs=1e-15)
        assert r.mean_rho == pytest.approx(np.mean(r.per_fold_rho), abs=1e-15)

    def test_degenerate_folds(self):
        r = monte_carlo_cv(self.planted(), ElasticNetConfig(1e6, 0), folds=4, seed=0)
        assert r.per_fold_rho == (0.0,) * 4 and r.degenerate_folds == (0, 1, 2, 3)

    def test_deterministic_and_parallel(self):
        prob = self.planted(noise=1.0)
        a = monte_carlo_cv(prob, folds=6, seed=3)
        b = monte_carlo_cv(prob, folds=6, seed=3)
        c = monte_carlo_cv(prob, folds=6, seed=3, n_jobs=3)
        for other in (b, c):
            assert a.per_fold_rho == other.per_fold_rho
            assert all(np.array_equal(x, y) for x, y in zip(a.per_fold_models, other.per_fold_models))
            assert a.top_terms == other.top_terms
        assert monte_carlo_cv(prob, folds=6, seed=4).per_fold_rho != a.per_fold_rho

    def test_top_terms_found(self):
        r = monte_carlo_cv(self.planted(noise=0.5), folds=5, seed=0)
        assert r.top_terms == ("aa", "ee")

    def test_csv(self, tmp_path):
        r = monte_carlo_cv(self.planted(noise=0.5), folds=3, seed=0)
        write_cv_csv([r], tmp_path / "cv.csv", folds=3, top_k=2)
        head, row = (tmp_path / "cv.csv").read_text().splitlines()
        assert head == "attribute,mean_rho,std_rho,fold_1,fold_2,fold_3,top_term_1,top_term_2"
        assert row.startswith("a,") and row.endswith(",aa,ee")


def cv_with(models, terms):
    return CVResult("a", tuple(0.0 for _ in models), 0.0, 0.0, tuple(np.asarray(m, float) for m in models), tuple(terms))


class TestTopCoefficients:
    def test_identical_models(self):
        r = cv_with([[0.1, 0.5, 0.0, 0.3]] * 10, "abcd")
        assert top_coefficients(r, 2) == ["b", "d"]
        assert top_coefficients(r, 5) == ["b", "d", "a"]

    def test_majority_rule(self):
        terms = [f"t{i:02d}" for i in range(15)]
        models = []
        for f in range(10):
            th = np.linspace(0.5, 0.1, 15)
            th[0] = 1.0 if f < 6 else -1.0
            models.append(th)
        # t00 is first in six folds and negative (outside the top R) in four
        got = top_coefficients(cv_with(models, terms), 15)
        assert "t00" in got
        # five of ten is not a majority
        models[5] = models[9]
        assert "t00" not in top_coefficients(cv_with(models, terms), 15)

    def test_no_majority(self):
        models = [np.eye(10)[i] for i in range(10)]
        assert top_coefficients(cv_with(models, "abcdefghij"), 2) == []

    def test_minority_excluded(self):
        terms = [f"t{i:02d}" for i in range(12)]
        models = [np.r_[[1.0 if f < 5 else 0.0], np.zeros(11)] for f in range(10)]
        assert top_coefficients(cv_with(models, terms), 2) == []
