"""Second-order Gaussian model-X knockoffs with the equicorrelated construction."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core_numerics import check_covariance, cholesky, min_eigenvalue
from .errors import (
    DecompositionError,
    DegenerateFeatureError,
    DomainError,
    KnockoffConstructionError,
    ShapeError,
)

S_SLACK = 1e-8


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """Gaussian covariate model plus the precomputed knockoff conditional.

    Build instances with :func:`gaussian_model` or :func:`estimate_gaussian`;
    both fill ``projection`` (``Sigma^{-1} diag(s)``) and ``conditional_chol``.
    """

    mean: np.ndarray
    sigma: np.ndarray
    s: np.ndarray
    projection: np.ndarray = field(repr=False)
    conditional_chol: np.ndarray = field(repr=False)
    shrinkage: float | None = None

    @property
    def p(self):
        return self.mean.shape[0]

    def joint_covariance(self):
        """Covariance ``[[Sigma, Sigma - D], [Sigma - D, Sigma]]`` of ``[X, X_tilde]``."""
        off = self.sigma - np.diag(self.s)
        return np.block([[self.sigma, off], [off, self.sigma]])


@dataclass(frozen=True)
class KnockoffCopy:
    x_tilde: np.ndarray
    bootstrap_id: int


def equicorrelated_s(sigma_corr):
    """Equicorrelated knockoff diagonal ``min(2 * lambda_min, 1) * (1 - 1e-8)``."""
    sigma_corr = np.asarray(sigma_corr, dtype=float)
    if sigma_corr.ndim != 2 or sigma_corr.shape[0] != sigma_corr.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {sigma_corr.shape}")
    if not np.allclose(np.diag(sigma_corr), 1.0, rtol=0, atol=1e-10):
        raise DomainError("equicorrelated_s expects a correlation matrix (unit diagonal)")
    lam = min_eigenvalue(sigma_corr)
    if lam <= 0:
        raise DomainError(f"correlation matrix is not positive definite (smallest eigenvalue {lam:.3g})")
    value = min(2.0 * lam, 1.0) * (1.0 - S_SLACK)
    return np.full(sigma_corr.shape[0], value)


def _psd_factor(v):
    """Square-root factor of a PSD matrix; Cholesky when possible."""
    try:
        return cholesky(v)
    except DecompositionError:
        pass
    w, vecs = np.linalg.eigh(v)
    top = max(w[-1], 0.0)
    if w[0] < -1e-8 * max(top, 1e-300) and top > 0:
        raise KnockoffConstructionError(
            f"knockoff conditional covariance is not PSD (smallest eigenvalue {w[0]:.3g})"
        )
    return vecs * np.sqrt(np.clip(w, 0.0, None))


def gaussian_model(mean, sigma, s=None, shrinkage=None):
    """Knockoff model for known moments ``(mean, sigma)``.

    When ``s`` is omitted it is computed with the equicorrelated rule on the
    correlation matrix of ``sigma`` and mapped back to the covariance scale.
    """
    sigma = check_covariance(sigma)
    p = sigma.shape[0]
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (p,):
        raise ShapeError(f"mean has shape {mean.shape}, sigma has shape {sigma.shape}")
    if s is None:
        sd = np.sqrt(np.diag(sigma))
        corr = sigma / np.outer(sd, sd)
        np.fill_diagonal(corr, 1.0)
        s = equicorrelated_s(corr) * sd**2
    else:
        s = np.asarray(s, dtype=float)
        if s.shape != (p,):
            raise ShapeError(f"s has shape {s.shape}, expected ({p},)")
        if np.any(s < 0):
            raise DomainError("s must be non-negative")

    d = np.diag(s)
    projection = scipy.linalg.solve(sigma, d, assume_a="pos")
    cond = 2.0 * d - d @ projection
    cond = 0.5 * (cond + cond.T)
    return GaussianModel(
        mean=mean,
        sigma=sigma,
        s=s,
        projection=projection,
        conditional_chol=_psd_factor(cond),
        shrinkage=shrinkage,
    )


def ledoit_wolf_shrinkage(z):
    """Ledoit-Wolf intensity for shrinking the correlation of standardized ``z`` toward identity."""
    n = z.shape[0]
    s = z.T @ z / n
    d2 = np.sum((s - np.eye(s.shape[0])) ** 2)
    if d2 == 0.0:
        return 0.0
    row_sq = np.sum(z**2, axis=1)
    b2 = (np.sum(row_sq**2) - n * np.sum(s**2)) / n**2
    return float(min(max(b2, 0.0), d2) / d2)


def estimate_gaussian(x, shrinkage="auto"):
    """Fit a Gaussian knockoff model to the rows of ``x``.

    Columns are standardized, their correlation matrix is shrunk toward the
    identity with weight ``shrinkage`` (Ledoit-Wolf when ``"auto"``), and the
    result is mapped back to the covariance scale. Equivalently the empirical
    covariance is combined with its own diagonal.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ShapeError(f"x must be 2-D, got shape {x.shape}")
    n, p = x.shape
    if n < 2 or p < 1:
        raise ShapeError(f"need n >= 2 and p >= 1, got {x.shape}")
    if np.isnan(x).any():
        raise DomainError("x contains NaN")
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    for j in range(p):
        if sd[j] <= 1e-12 * max(1.0, abs(mean[j])):
            raise DegenerateFeatureError(j)
    z = (x - mean) / sd

    if shrinkage == "auto":
        eta = ledoit_wolf_shrinkage(z)
    else:
        eta = float(shrinkage)
        if not (0.0 <= eta <= 1.0):
            raise DomainError(f"shrinkage must lie in [0, 1], got {shrinkage}")

    corr = z.T @ z / n
    corr = (1.0 - eta) * corr + eta * np.eye(p)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    s = equicorrelated_s(corr) * sd**2
    sigma = corr * np.outer(sd, sd)
    return gaussian_model(mean, sigma, s=s, shrinkage=eta)


def sample_knockoffs(x, model, rng, bootstrap_id=0):
    """Draw ``X_tilde | X = x`` from ``N(x - (x - mu) Sigma^{-1} D, 2D - D Sigma^{-1} D)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.p:
        raise ShapeError(f"x has shape {x.shape}, model has p = {model.p}")
    cond_mean = x - (x - model.mean) @ model.projection
    noise = rng.standard_normal(x.shape) @ model.conditional_chol.T
    return KnockoffCopy(x_tilde=cond_mean + noise, bootstrap_id=bootstrap_id)
