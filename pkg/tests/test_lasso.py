import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ako.core_numerics import derive_stream
from ako.errors import ConfigError, DataError
from ako.lasso import lambda_grid, lambda_max, lasso_cd, objective, select_lambda_cv, standardize_design


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def centered_problem(seed, n=60, q=30, k=4, noise=0.5):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, q))
    beta = np.zeros(q)
    beta[rng.choice(q, k, replace=False)] = rng.choice([-2.0, 2.0], k)
    y = z @ beta + noise * rng.standard_normal(n)
    return z - z.mean(axis=0), y - y.mean()


def kkt_residual(z, y, beta, lam):
    grad = z.T @ (y - z @ beta)
    zero = beta == 0
    res_zero = np.maximum(np.abs(grad[zero]) - lam, 0.0)
    res_active = np.abs(grad[~zero] - lam * np.sign(beta[~zero]))
    return max(res_zero.max(initial=0.0), res_active.max(initial=0.0))


def test_lambda_max_orthogonal_response():
    z = np.array([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]])
    y = np.array([1.0, 1.0, 1.0, 1.0]) - 1.0
    assert lambda_max(z, y) == 0.0


def test_lambda_max_single_column():
    z = np.array([[1.0], [-1.0], [0.0]])
    y = np.array([2.0, -1.0, 0.0])
    assert lambda_max(z, y) == 3.0


@pytest.mark.parametrize("seed", range(5))
def test_above_lambda_max_is_zero(seed):
    z, y = centered_problem(seed)
    lmax = lambda_max(z, y)
    assert np.all(lasso_cd(z, y, 1.001 * lmax).beta_hat == 0.0)
    assert np.all(lasso_cd(z, y, lmax).beta_hat == 0.0)


def test_orthonormal_design_closed_form():
    q_mat, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((40, 10)))
    y = np.random.default_rng(4).standard_normal(40) * 3
    for lam in (0.1, 0.5, 1.5):
        fit = lasso_cd(q_mat, y, lam)
        np.testing.assert_allclose(fit.beta_hat, soft_threshold(q_mat.T @ y, lam), atol=1e-8)
        assert fit.converged


def test_tiny_lambda_matches_least_squares():
    z, y = centered_problem(5, n=80, q=10)
    ls = np.linalg.solve(z.T @ z, z.T @ y)
    fit = lasso_cd(z, y, 1e-12, tol=1e-12, max_iter=100_000)
    np.testing.assert_allclose(fit.beta_hat, ls, atol=1e-4)


@pytest.mark.parametrize("seed", range(20))
def test_kkt_conditions(seed):
    z, y = centered_problem(seed, n=50, q=80)
    lam = 0.2 * lambda_max(z, y)
    fit = lasso_cd(z, y, lam)
    assert fit.converged
    assert kkt_residual(z, y, fit.beta_hat, lam) <= 1e-5


def test_objective_non_increasing_over_cycles():
    z, y = centered_problem(11, n=40, q=60)
    lam = 0.05 * lambda_max(z, y)
    values = [objective(z, y, lasso_cd(z, y, lam, max_iter=k).beta_hat, lam) for k in range(1, 15)]
    assert all(b <= a + 1e-10 for a, b in zip(values, values[1:]))
    assert values[0] < objective(z, y, np.zeros(60), lam)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_permutation_equivariance(seed):
    z, y = centered_problem(seed, n=30, q=20)
    perm = np.random.default_rng(seed).permutation(20)
    lam = 0.3 * lambda_max(z, y)
    a = lasso_cd(z, y, lam, tol=1e-10).beta_hat
    b = lasso_cd(z[:, perm], y, lam, tol=1e-10).beta_hat
    np.testing.assert_allclose(b, a[perm], atol=1e-6)


def test_non_convergence_is_reported():
    z, y = centered_problem(2, n=30, q=60)
    fit = lasso_cd(z, y, 1e-3 * lambda_max(z, y), max_iter=1, tol=1e-14)
    assert not fit.converged
    assert fit.n_iters == 1


def test_nan_input_rejected():
    z, y = centered_problem(1)
    y[3] = np.nan
    with pytest.raises(DataError):
        lasso_cd(z, y, 1.0)


def test_cv_requires_enough_rows():
    z, y = centered_problem(1, n=4, q=3, k=2)
    with pytest.raises(ConfigError):
        select_lambda_cv(z, y, derive_stream(0, 0), folds=5)


def test_cv_pure_noise_picks_large_lambda():
    upper = 0
    for seed in range(9):
        rng = np.random.default_rng(100 + seed)
        z, y = standardize_design(rng.standard_normal((200, 50)), rng.standard_normal(200))
        grid = lambda_grid(lambda_max(z, y))
        lam = select_lambda_cv(z, y, derive_stream(seed, 1))
        upper += lam >= grid[49]
    assert upper >= 5


def test_cv_strong_signal_refit_finds_true_column():
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(200 + seed)
        x = rng.standard_normal((100, 30))
        signal = 2.0 * x[:, 7]
        eps = rng.standard_normal(100)
        y = signal + np.linalg.norm(signal) / (10 * np.linalg.norm(eps)) * eps
        z, yc = standardize_design(x, y)
        lam = select_lambda_cv(z, yc, derive_stream(seed, 2))
        hits += np.argmax(np.abs(lasso_cd(z, yc, lam).beta_hat)) == 7
    assert hits > 10


def test_cv_deterministic():
    z, y = standardize_design(*centered_problem(8, n=60, q=40))
    assert select_lambda_cv(z, y, derive_stream(4, 4)) == select_lambda_cv(z, y, derive_stream(4, 4))


def test_standardize_design():
    z, y = standardize_design(np.array([[1.0, 2.0], [3.0, 2.0], [5.0, 2.0]]), np.array([1.0, 2.0, 6.0]))
    np.testing.assert_allclose(z[:, 0], np.array([-1.0, 0.0, 1.0]) / np.sqrt(2))
    assert np.all(z[:, 1] == 0.0)
    np.testing.assert_allclose(y, [-2.0, -1.0, 3.0])
