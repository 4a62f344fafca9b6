"""Quantile aggregation of knockoff p-values and step-up FDR control (AKO)."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PipelineError
from .inference import KAPPA, knockoff_run, parse_lambda_policy

FDR_METHODS = ("bh", "by")


@dataclass(frozen=True)
class AkoConfig:
    alpha: float = 0.1
    n_bootstraps: int = 25
    gamma: float = 0.3
    fdr_method: str = "bh"
    offset_c: float = 1.0
    master_seed: int = 0
    lambda_policy: object = "cv"
    kappa_correct: bool = False

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.n_bootstraps) != self.n_bootstraps or self.n_bootstraps < 1:
            raise ConfigError(f"n_bootstraps must be a positive integer, got {self.n_bootstraps}")
        if not (0.0 < self.gamma <= 1.0):
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.fdr_method not in FDR_METHODS:
            raise ConfigError(f"fdr_method must be one of {FDR_METHODS}, got {self.fdr_method!r}")
        if not self.offset_c > 0:
            raise ConfigError(f"offset_c must be positive, got {self.offset_c}")
        if not (0 <= int(self.master_seed) < 2**64):
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "lambda_policy", parse_lambda_policy(self.lambda_policy))

    @property
    def effective_alpha(self):
        return self.alpha / KAPPA if self.kappa_correct else self.alpha


@dataclass(frozen=True)
class AggregationResult:
    pi_bar: np.ndarray
    k_hat: int | None
    selected: np.ndarray
    per_bootstrap: list = field(default_factory=list)


def order_statistic_rank(gamma, n):
    """1-based rank ``ceil(gamma * n)`` of the empirical gamma-quantile."""
    # round first so that e.g. 0.3 * 10 does not become 4
    return max(1, math.ceil(round(gamma * n, 9)))


def quantile_aggregate(pvals, gamma):
    """``min(1, q_gamma / gamma)`` per column of a ``B x p`` p-value matrix."""
    if not (0.0 < gamma <= 1.0):
        raise ConfigError(f"gamma must lie in (0, 1], got {gamma}")
    pvals = np.atleast_2d(np.asarray(pvals, dtype=float))
    k = order_statistic_rank(gamma, pvals.shape[0])
    q = np.sort(pvals, axis=0)[k - 1]
    return np.minimum(1.0, q / gamma)


def bh_select(pvals, alpha):
    """Benjamini-Hochberg step-up. Returns ``(k_hat, selected)``, ``k_hat`` None if empty."""
    pvals = np.asarray(pvals, dtype=float)
    p = pvals.size
    if p == 0:
        return None, np.array([], dtype=np.int64)
    ordered = np.sort(pvals)
    ks = np.arange(1, p + 1)
    ok = np.flatnonzero(ordered <= ks * alpha / p)
    if ok.size == 0:
        return None, np.array([], dtype=np.int64)
    k_hat = int(ok[-1]) + 1
    return k_hat, np.flatnonzero(pvals <= ordered[k_hat - 1])


def by_correction(p):
    return 1.0 / np.sum(1.0 / np.arange(1, p + 1))


def by_select(pvals, alpha):
    """Benjamini-Yekutieli step-up: BH at level ``alpha / sum_{i<=p} 1/i``."""
    pvals = np.asarray(pvals, dtype=float)
    if pvals.size == 0:
        return None, np.array([], dtype=np.int64)
    return bh_select(pvals, by_correction(pvals.size) * alpha)


def step_up(pvals, alpha, method):
    if method == "bh":
        return bh_select(pvals, alpha)
    if method == "by":
        return by_select(pvals, alpha)
    raise ConfigError(f"unknown fdr method {method!r}")


def map_ordered(fn, items, threads=1):
    """``list(map(fn, items))``, optionally on a thread pool; order is preserved."""
    if threads is None or threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def bootstrap_runs(x, y, model, config, n_bootstraps=None, threads=1):
    """Knockoff runs for bootstraps ``1..B`` on streams ``(master_seed, b)``."""
    n_bootstraps = config.n_bootstraps if n_bootstraps is None else n_bootstraps
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def one(b):
        return knockoff_run(x, y, model, config.master_seed, b, config.lambda_policy, config.offset_c)

    return map_ordered(one, range(1, n_bootstraps + 1), threads)


def aggregate_runs(runs, gamma, alpha, fdr_method="bh"):
    """Aggregate converged bootstrap runs and apply the step-up."""
    good = [r for r in runs if r.converged]
    if not good:
        raise PipelineError(f"all {len(runs)} bootstrap Lasso fits failed to converge")
    pi_bar = quantile_aggregate(np.vstack([r.pi for r in good]), gamma)
    k_hat, selected = step_up(pi_bar, alpha, fdr_method)
    return AggregationResult(pi_bar=pi_bar, k_hat=k_hat, selected=selected, per_bootstrap=list(runs))


def run_ako(x, y, model, config, threads=1):
    """Aggregation of multiple knockoffs.

    Bootstraps whose Lasso did not converge stay in ``per_bootstrap`` but are
    left out of the aggregation. The result does not depend on ``threads``.
    """
    runs = bootstrap_runs(x, y, model, config, threads=threads)
    return aggregate_runs(runs, config.gamma, config.effective_alpha, config.fdr_method)
