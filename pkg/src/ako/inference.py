"""Vanilla knockoff inference: LCD statistic, knockoff+ threshold, intermediate p-values."""

import math
from dataclasses import dataclass

import numpy as np

from .core_numerics import derive_stream
from .errors import ConfigError, DomainError, ShapeError
from .knockoffs import sample_knockoffs
from .lasso import lasso_cd, select_lambda_cv, standardize_design

KAPPA = (math.sqrt(22) - 2) / (7 * math.sqrt(22) - 32)


@dataclass(frozen=True)
class KnockoffStats:
    w: np.ndarray
    bootstrap_id: int = 0


@dataclass(frozen=True)
class IntermediatePValues:
    pi: np.ndarray
    offset_c: float = 1.0


@dataclass(frozen=True)
class KnockoffRun:
    """Summary of one knockoff draw and its inference pass."""

    bootstrap_id: int
    w: np.ndarray
    pi: np.ndarray
    lam: float
    converged: bool
    n_iters: int


def _w(stats):
    return np.asarray(getattr(stats, "w", stats), dtype=float)


def lcd_statistic(beta_hat, bootstrap_id=0):
    """``w_j = |beta_j| - |beta_{j+p}|`` for a coefficient vector over ``[X, X_tilde]``."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    if beta_hat.ndim != 1 or beta_hat.shape[0] % 2:
        raise ShapeError(f"beta_hat must be a vector of even length, got shape {beta_hat.shape}")
    p = beta_hat.shape[0] // 2
    return KnockoffStats(w=np.abs(beta_hat[:p]) - np.abs(beta_hat[p:]), bootstrap_id=bootstrap_id)


def knockoff_threshold(stats, alpha):
    """Knockoff+ threshold.

    The smallest ``t`` among the nonzero ``|w_j|`` with
    ``(1 + #{w <= -t}) / max(#{w >= t}, 1) <= alpha``, or ``inf`` when none
    qualifies.
    """
    w = _w(stats)
    cand = np.unique(np.abs(w[w != 0]))
    if cand.size == 0:
        return math.inf
    w_sorted = np.sort(w)
    n_neg = np.searchsorted(w_sorted, -cand, side="right")
    n_pos = w.size - np.searchsorted(w_sorted, cand, side="left")
    ratio = (1.0 + n_neg) / np.maximum(n_pos, 1)
    ok = np.flatnonzero(ratio <= alpha)
    return float(cand[ok[0]]) if ok.size else math.inf


def vanilla_select(stats, alpha):
    """0-based indices ``{j : w_j >= tau}``; empty when the threshold is infinite."""
    w = _w(stats)
    tau = knockoff_threshold(w, alpha)
    if math.isinf(tau):
        return np.array([], dtype=np.int64)
    return np.flatnonzero(w >= tau)


def intermediate_pvalues(stats, offset_c=1.0):
    """``pi_j = (c + #{k : w_k <= -w_j}) / p`` when ``w_j > 0``, else 1; capped at 1."""
    if not offset_c > 0:
        raise DomainError(f"offset_c must be positive, got {offset_c}")
    w = _w(stats)
    p = w.size
    counts = np.searchsorted(np.sort(w), -w, side="right")
    pi = np.minimum(1.0, (offset_c + counts) / p)
    pi[w <= 0] = 1.0
    return IntermediatePValues(pi=pi, offset_c=float(offset_c))


def parse_lambda_policy(policy):
    """Normalize ``"cv"``, ``"fixed:<val>"``, a number or ``("fixed", val)``."""
    if policy is None or policy == "cv":
        return "cv"
    if isinstance(policy, str):
        if policy.startswith("fixed:"):
            policy = policy.split(":", 1)[1]
        try:
            policy = float(policy)
        except ValueError:
            raise ConfigError(f"unknown lambda policy {policy!r}") from None
    if isinstance(policy, tuple) and len(policy) == 2 and policy[0] == "fixed":
        policy = float(policy[1])
    if isinstance(policy, (int, float)) and policy > 0:
        return float(policy)
    raise ConfigError(f"invalid lambda policy {policy!r}")


def knockoff_run(x, y, model, master_seed, bootstrap_id, lambda_policy="cv", offset_c=1.0):
    """One knockoff draw on stream ``(master_seed, bootstrap_id)`` and its statistics.

    The stream feeds the knockoff sample first and the CV fold assignment
    second. Columns of ``[x, x_tilde]`` are centered and scaled to unit norm
    before the Lasso fit, and a fixed ``lambda_policy`` value refers to that
    standardized problem.
    """
    rng = derive_stream(master_seed, bootstrap_id)
    ko = sample_knockoffs(x, model, rng, bootstrap_id)
    z, yc = standardize_design(np.hstack([x, ko.x_tilde]), y)
    policy = parse_lambda_policy(lambda_policy)
    lam = select_lambda_cv(z, yc, rng) if policy == "cv" else policy
    fit = lasso_cd(z, yc, lam)
    stats = lcd_statistic(fit.beta_hat, bootstrap_id)
    pvals = intermediate_pvalues(stats, offset_c)
    return KnockoffRun(
        bootstrap_id=bootstrap_id,
        w=stats.w,
        pi=pvals.pi,
        lam=float(lam),
        converged=fit.converged,
        n_iters=fit.n_iters,
    )


def run_ko(x, y, model, alpha, master_seed, stream_id=1, lambda_policy="cv"):
    """Vanilla knockoff filter on a single draw. Returns ``(selected, run)``."""
    run = knockoff_run(x, y, model, master_seed, stream_id, lambda_policy)
    return vanilla_select(run.w, alpha), run
