import numpy as np
import pytest

from sparsebench.core.exceptions import IllPosedError
from sparsebench.schemas.fit import CvPlan, PenaltyConfig
from sparsebench.services.classical import (
    ENET_ALPHAS,
    RIDGE_LAMBDAS,
    CvCell,
    coordinate_descent,
    elastic_net_objective,
    enet_path,
    fit_elastic_net_cv,
    fit_lasso_cv,
    fit_ols,
    fit_ridge_loocv,
    kfold_split,
    kkt_residuals,
    lambda_max,
    lambda_path,
    ridge_loocv_errors,
    ridge_solution,
    select_cv_cell,
    soft_threshold,
)


@pytest.fixture
def regression(rng):
    x = rng.normal(size=(60, 8))
    beta = np.array([2.0, 0.0, -1.5, 0.0, 0.0, 0.7, 0.0, 0.0])
    y = x @ beta + 0.5 * rng.normal(size=60)
    return x, y


@pytest.fixture
def strong_signal():
    rng = np.random.default_rng(2024)
    x = rng.normal(size=(200, 10))
    beta = np.zeros(10)
    beta[[2, 7]] = [3.0, -2.5]
    signal = x @ beta
    sigma = np.sqrt(np.var(signal) / 20.0)
    return x, signal + sigma * rng.normal(size=200), beta


class TestOls:
    def test_identity_design(self):
        y = np.arange(1.0, 6.0)
        np.testing.assert_allclose(fit_ols(np.eye(5), y).beta_hat, y, atol=1e-12)

    def test_matches_qr_solve(self, rng):
        x = rng.normal(size=(30, 8))
        y = rng.normal(size=30)
        q, r = np.linalg.qr(x)
        expected = np.linalg.solve(r, q.T @ y)
        np.testing.assert_allclose(fit_ols(x, y).beta_hat, expected, atol=1e-8)

    def test_noiseless_recovery(self, rng):
        x = rng.normal(size=(40, 6))
        beta = rng.normal(size=6)
        np.testing.assert_allclose(fit_ols(x, x @ beta).beta_hat, beta, atol=1e-8)

    def test_rank_deficient_rejected(self, rng):
        x = rng.normal(size=(20, 3))
        x = np.column_stack([x, x[:, 0]])
        with pytest.raises(IllPosedError):
            fit_ols(x, rng.normal(size=20))

    def test_wide_design_rejected(self, rng):
        with pytest.raises(IllPosedError):
            fit_ols(rng.normal(size=(5, 10)), rng.normal(size=5))


class TestRidge:
    def test_vanishing_penalty_is_ols(self, regression):
        x, y = regression
        np.testing.assert_allclose(ridge_solution(x, y, 1e-12), fit_ols(x, y).beta_hat, atol=1e-6)

    def test_loocv_matches_brute_force(self, rng):
        n, p = 20, 5
        x = rng.normal(size=(n, p))
        y = rng.normal(size=n)
        lambdas = [1e-3, 0.1, 10.0]
        closed = ridge_loocv_errors(x, y, lambdas)
        for k, lam in enumerate(lambdas):
            for i in range(n):
                keep = np.arange(n) != i
                # Same penalty matrix as the full fit
                a = x[keep].T @ x[keep] + 2.0 * n * lam * np.eye(p)
                beta = np.linalg.solve(a, x[keep].T @ y[keep])
                assert closed[k, i] == pytest.approx(y[i] - x[i] @ beta, abs=1e-8)

    def test_norm_shrinks_along_grid(self, regression):
        x, y = regression
        norms = [np.linalg.norm(ridge_solution(x, y, lam)) for lam in RIDGE_LAMBDAS]
        assert np.all(np.diff(norms) < 0)
        assert norms[-1] < 1e-2

    def test_fit_picks_grid_value(self, regression):
        x, y = regression
        fit = fit_ridge_loocv(x, y)
        assert fit.chosen_penalty.alpha == 0.0
        assert fit.chosen_penalty.lam in RIDGE_LAMBDAS
        cv_mse = np.mean(ridge_loocv_errors(x, y, RIDGE_LAMBDAS) ** 2, axis=1)
        assert fit.chosen_penalty.lam == RIDGE_LAMBDAS[int(np.argmin(cv_mse))]


class TestCoordinateDescent:
    def test_soft_threshold(self):
        np.testing.assert_allclose(soft_threshold(np.array([3.0, -3.0, 0.5]), 1.0), [2.0, -2.0, 0.0])

    def test_unpenalized_is_ols(self, regression):
        x, y = regression
        result = coordinate_descent(x, y, PenaltyConfig(lam=0.0, alpha=1.0), tol=1e-10)
        assert result.converged
        np.testing.assert_allclose(result.beta, fit_ols(x, y).beta_hat, atol=1e-6)

    def test_orthonormal_design_soft_threshold(self, rng):
        n, p = 50, 6
        q, _ = np.linalg.qr(rng.normal(size=(n, p)))
        x = np.sqrt(n) * q
        y = x @ np.array([1.0, -0.5, 0.05, 0.0, 2.0, -0.1]) + 0.1 * rng.normal(size=n)
        lam = 0.2
        result = coordinate_descent(x, y, PenaltyConfig(lam=lam, alpha=1.0))
        expected = soft_threshold(x.T @ y / n, lam)
        np.testing.assert_allclose(result.beta, expected, atol=1e-8)

    @pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0])
    @pytest.mark.parametrize("lam", [0.01, 0.1, 0.5])
    def test_converged_output_passes_kkt(self, regression, lam, alpha):
        x, y = regression
        penalty = PenaltyConfig(lam=lam, alpha=alpha)
        result = coordinate_descent(x, y, penalty)
        assert result.converged
        assert np.max(kkt_residuals(x, y, result.beta, penalty)) < 1e-6

    def test_objective_not_above_warm_start(self, regression, rng):
        x, y = regression
        penalty = PenaltyConfig(lam=0.1, alpha=0.5)
        start = rng.normal(size=8)
        result = coordinate_descent(x, y, penalty, warm_start=start)
        assert elastic_net_objective(x, y, result.beta, penalty) <= elastic_net_objective(
            x, y, start, penalty
        )

    @pytest.mark.parametrize("alpha", [0.5, 1.0])
    def test_objective_never_rises_between_sweeps(self, rng, alpha):
        x = rng.normal(size=(80, 12))
        x[:, 1] = x[:, 0] + 0.1 * rng.normal(size=80)
        y = x[:, :3] @ np.array([1.5, -1.0, 0.5]) + rng.normal(size=80)
        penalty = PenaltyConfig(lam=0.05, alpha=alpha)

        beta = np.zeros(12)
        previous = elastic_net_objective(x, y, beta, penalty)
        for _ in range(30):
            beta = coordinate_descent(x, y, penalty, max_iter=1, warm_start=beta).beta
            current = elastic_net_objective(x, y, beta, penalty)
            assert current <= previous + 1e-12
            previous = current

    def test_max_iter_flags_non_convergence(self, regression):
        x, y = regression
        result = coordinate_descent(x, y, PenaltyConfig(lam=0.01, alpha=1.0), max_iter=1)
        assert not result.converged
        assert result.sweeps == 1
        assert np.all(np.isfinite(result.beta))

    def test_zero_above_lambda_max(self, regression):
        x, y = regression
        lam = lambda_max(x, y) * 1.01
        result = coordinate_descent(x, y, PenaltyConfig(lam=lam, alpha=1.0))
        np.testing.assert_array_equal(result.beta, np.zeros(8))

    def test_grouping_effect_on_duplicated_feature(self, rng):
        x = rng.normal(size=(100, 4))
        x = np.column_stack([x, x[:, 0]])
        y = 2.0 * x[:, 0] + x[:, 1] + 0.3 * rng.normal(size=100)
        result = coordinate_descent(
            x, y, PenaltyConfig(lam=0.1, alpha=0.1), tol=1e-10, max_iter=100_000
        )
        b0, b4 = result.beta[0], result.beta[4]
        assert abs(b0 - b4) < 0.05 * abs(b0 + b4)


class TestPath:
    def test_lambda_path_shape(self):
        path = lambda_path(2.0)
        assert path.shape == (100,)
        assert path[0] == pytest.approx(2.0)
        assert path[-1] == pytest.approx(2e-3)
        assert np.all(np.diff(path) < 0)

    def test_orthogonal_response_rejected(self):
        with pytest.raises(IllPosedError):
            lambda_path(0.0)

    def test_path_starts_empty_and_grows(self, regression):
        x, y = regression
        lambdas = lambda_path(lambda_max(x, y), 20)
        coefs, converged = enet_path(x, y, lambdas)
        assert converged.all()
        np.testing.assert_array_equal(coefs[0], np.zeros(8))
        assert np.count_nonzero(coefs[-1]) > np.count_nonzero(coefs[5])


class TestKFold:
    def test_even_split(self):
        folds = kfold_split(10, 5, fold_seed=0)
        assert [len(f) for f in folds] == [2, 2, 2, 2, 2]

    def test_remainder_split(self):
        folds = kfold_split(11, 5, fold_seed=0)
        assert sorted(len(f) for f in folds) == [2, 2, 2, 2, 3]

    def test_partition(self):
        folds = kfold_split(23, 4, fold_seed=9)
        np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(23))

    def test_deterministic(self):
        a = kfold_split(30, 5, fold_seed=3)
        b = kfold_split(30, 5, fold_seed=3)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa, fb)

    def test_too_many_folds(self):
        with pytest.raises(ValueError):
            kfold_split(3, 5, fold_seed=0)


class TestCrossValidation:
    def test_tie_goes_to_larger_alpha_then_lambda(self):
        cells = [
            CvCell(alpha=0.5, lam=0.1, index=3, error=1.0),
            CvCell(alpha=0.9, lam=0.05, index=4, error=1.0),
            CvCell(alpha=0.9, lam=0.2, index=2, error=1.0),
            CvCell(alpha=0.1, lam=1.0, index=0, error=1.5),
        ]
        best = select_cv_cell(cells)
        assert (best.alpha, best.lam) == (0.9, 0.2)

    def test_lasso_recovers_strong_signal(self, strong_signal):
        x, y, beta = strong_signal
        fit = fit_lasso_cv(x, y, CvPlan(fold_seed=1))
        support = np.flatnonzero(beta)
        assert np.all(np.abs(fit.beta_hat[support]) > 1.0)
        off = np.delete(fit.beta_hat, support)
        assert np.max(np.abs(off)) < 0.2
        assert fit.chosen_penalty.alpha == 1.0
        assert fit.converged

    def test_lasso_deterministic(self, regression):
        x, y = regression
        a = fit_lasso_cv(x, y, CvPlan(fold_seed=5))
        b = fit_lasso_cv(x, y, CvPlan(fold_seed=5))
        np.testing.assert_array_equal(a.beta_hat, b.beta_hat)
        assert a.chosen_penalty == b.chosen_penalty

    def test_alpha_one_grid_equals_lasso(self, regression):
        x, y = regression
        plan = CvPlan(fold_seed=8, alpha_grid=(1.0,))
        enet = fit_elastic_net_cv(x, y, plan)
        lasso = fit_lasso_cv(x, y, CvPlan(fold_seed=8))
        np.testing.assert_array_equal(enet.beta_hat, lasso.beta_hat)
        assert enet.chosen_penalty == lasso.chosen_penalty

    def test_elastic_net_picks_from_grid(self, regression):
        x, y = regression
        fit = fit_elastic_net_cv(x, y, CvPlan(fold_seed=2, alpha_grid=ENET_ALPHAS, n_lambdas=30))
        assert fit.chosen_penalty.alpha in ENET_ALPHAS
        assert fit.chosen_penalty.lam > 0

    @pytest.mark.parametrize(
        "fitter, plan",
        [
            (fit_lasso_cv, CvPlan(fold_seed=3)),
            (fit_elastic_net_cv, CvPlan(fold_seed=3, alpha_grid=ENET_ALPHAS, n_lambdas=40)),
        ],
    )
    def test_selected_fit_passes_kkt(self, regression, fitter, plan):
        x, y = regression
        fit = fitter(x, y, plan)
        assert fit.converged
        threshold = 1e-7 * max(1.0, float(np.max(np.abs(fit.beta_hat))))
        residuals = kkt_residuals(x, y, fit.beta_hat, fit.chosen_penalty)
        assert np.max(residuals) <= threshold + 1e-10

    def test_too_few_rows(self, rng):
        with pytest.raises(IllPosedError):
            fit_lasso_cv(rng.normal(size=(3, 2)), rng.normal(size=3), CvPlan(n_folds=5))
