"""Lasso on the concatenated design by cyclic coordinate descent.

Objective: ``(1/2) ||y - Z beta||^2 + lam * ||beta||_1`` with no ``1/n`` factor.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigError, DataError, ShapeError


@dataclass(frozen=True)
class LassoFit:
    beta_hat: np.ndarray
    lam: float
    n_iters: int
    converged: bool


@numba.njit(cache=True, nogil=True)
def _soft(v, t):
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


@numba.njit(cache=True, nogil=True)
def _sweep(z, col_sq, lam, beta, resid, idx):
    # one cyclic pass over the coordinates in idx; returns the largest update
    n = z.shape[0]
    biggest = 0.0
    for k in range(idx.shape[0]):
        j = idx[k]
        if col_sq[j] == 0.0:
            continue
        old = beta[j]
        rho = 0.0
        for i in range(n):
            rho += z[i, j] * resid[i]
        rho += col_sq[j] * old
        new = _soft(rho, lam) / col_sq[j]
        delta = new - old
        if delta != 0.0:
            for i in range(n):
                resid[i] -= delta * z[i, j]
            beta[j] = new
            if abs(delta) > biggest:
                biggest = abs(delta)
    return biggest


@numba.njit(cache=True, nogil=True)
def _active_solve(z, col_sq, lam, beta, resid, active, tol, max_sweeps):
    # coordinate descent restricted to `active`, via Gram updates of z_A' r
    m = active.shape[0]
    n = z.shape[0]
    za = np.empty((n, m))
    for k in range(m):
        za[:, k] = z[:, active[k]]
    gram = za.T @ za
    grad = za.T @ resid
    start = np.empty(m)
    for k in range(m):
        start[k] = beta[active[k]]
    for _ in range(max_sweeps):
        biggest = 0.0
        for k in range(m):
            j = active[k]
            old = beta[j]
            new = _soft(grad[k] + col_sq[j] * old, lam) / col_sq[j]
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                for i in range(m):
                    grad[i] -= delta * gram[i, k]
                if abs(delta) > biggest:
                    biggest = abs(delta)
        if biggest <= tol:
            break
    for k in range(m):
        delta = beta[active[k]] - start[k]
        if delta != 0.0:
            for i in range(n):
                resid[i] -= delta * za[i, k]


@numba.njit(cache=True, nogil=True)
def _cd(z, col_sq, lam, beta, resid, tol, max_iter):
    """In-place solve; returns (full cycles, converged)."""
    q = z.shape[1]
    everything = np.arange(q)
    for it in range(max_iter):
        if _sweep(z, col_sq, lam, beta, resid, everything) <= tol:
            return it + 1, True
        active = np.flatnonzero(beta)
        if active.shape[0] > 0:
            _active_solve(z, col_sq, lam, beta, resid, active, tol, 100 * max_iter)
    return max_iter, False


@numba.njit(cache=True, nogil=True)
def _cd_path(z, y, col_sq, lams, tol, max_iter, max_r2):
    """Warm-started path; stops once the training R^2 reaches max_r2.

    Returns the coefficient rows and the number of grid points solved.
    """
    q = z.shape[1]
    betas = np.zeros((lams.shape[0], q))
    beta = np.zeros(q)
    resid = y.copy()
    null = y @ y
    for k in range(lams.shape[0]):
        _cd(z, col_sq, lams[k], beta, resid, tol, max_iter)
        betas[k] = beta
        if null > 0.0 and 1.0 - (resid @ resid) / null >= max_r2:
            return betas, k + 1
    return betas, lams.shape[0]


def _as_problem(z, y):
    z = np.asfortranarray(z, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if z.ndim != 2 or y.ndim != 1 or z.shape[0] != y.shape[0]:
        raise ShapeError(f"z has shape {z.shape}, y has shape {y.shape}")
    if np.isnan(z).any() or np.isnan(y).any():
        raise DataError("NaN in Lasso inputs")
    return z, y


def lambda_max(z, y):
    """Smallest ``lam`` for which the Lasso solution is zero: ``max_j |z_j' y|``."""
    z, y = _as_problem(z, y)
    if z.shape[1] == 0:
        return 0.0
    return float(np.abs(z.T @ y).max())


def objective(z, y, beta, lam):
    r = y - z @ beta
    return 0.5 * float(r @ r) + lam * float(np.abs(beta).sum())


def lasso_cd(z, y, lam, tol=1e-7, max_iter=10000, beta0=None):
    """Cyclic coordinate descent with soft-thresholding.

    ``converged`` is true when the largest coefficient change in the last full
    cycle is at most ``tol``. Between full cycles the solver iterates over the
    current nonzero coordinates only. Non-convergence is reported, not raised.
    """
    z, y = _as_problem(z, y)
    if not lam >= 0:
        raise ConfigError(f"lambda must be non-negative, got {lam}")
    col_sq = np.einsum("ij,ij->j", z, z)
    if beta0 is None and lam >= lambda_max(z, y):
        # zero satisfies the KKT conditions; skip the sweep so rounding in z_j'y cannot move it
        return LassoFit(beta_hat=np.zeros(z.shape[1]), lam=float(lam), n_iters=0, converged=True)
    beta = np.zeros(z.shape[1]) if beta0 is None else np.array(beta0, dtype=np.float64)
    resid = y - z @ beta
    n_iters, converged = _cd(z, col_sq, float(lam), beta, resid, float(tol), int(max_iter))
    return LassoFit(beta_hat=beta, lam=float(lam), n_iters=int(n_iters), converged=bool(converged))


def lambda_grid(lam_max, grid_size=100, grid_ratio=0.01):
    return lam_max * np.geomspace(1.0, grid_ratio, grid_size)


def select_lambda_cv(
    z, y, rng, folds=5, grid_size=100, grid_ratio=0.01, tol=1e-4, max_iter=10000, max_r2=0.99
):
    """Pick ``lam`` on a geometric grid by K-fold held-out squared error.

    Each training fold is re-centered and solved with ``lam * n_train / n`` so
    that grid values keep their meaning under the unnormalized objective.
    Path fits use a coefficient tolerance of ``tol`` times the RMS of ``y``.
    As in glmnet, a fold's path stops once its training R^2 reaches
    ``max_r2``; only the grid prefix reached by every fold is scored.
    Ties go to the larger ``lam``.
    """
    z, y = _as_problem(z, y)
    n = z.shape[0]
    if folds < 2 or n < folds:
        raise ConfigError(f"need n >= folds >= 2, got n={n}, folds={folds}")
    lmax = lambda_max(z, y)
    if lmax <= 0.0:
        # every positive weight yields the zero solution
        return 1.0
    grid = lambda_grid(lmax, grid_size, grid_ratio)
    path_tol = tol * float(np.sqrt(np.mean(y**2)))
    assign = np.empty(n, dtype=np.int64)
    assign[rng.permutation(n)] = np.arange(n) % folds

    errors = np.zeros(grid_size)
    reached = grid_size
    for f in range(folds):
        test = assign == f
        train = ~test
        zt, yt = z[train], y[train]
        zm, ym = zt.mean(axis=0), yt.mean()
        zt = np.asfortranarray(zt - zm)
        yt = yt - ym
        col_sq = np.einsum("ij,ij->j", zt, zt)
        betas, solved = _cd_path(zt, yt, col_sq, grid * (train.sum() / n), path_tol, max_iter, max_r2)
        reached = min(reached, solved)
        pred = (z[test] - zm) @ betas[:solved].T + ym
        errors[:solved] += np.mean((y[test][:, None] - pred) ** 2, axis=0)
    return float(grid[np.argmin(errors[:reached])])


def standardize_design(z, y):
    """Center columns of ``z`` and ``y`` and scale columns of ``z`` to unit norm."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    zc = z - z.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", zc, zc))
    norms[norms == 0.0] = 1.0
    return np.asfortranarray(zc / norms), y - y.mean()
