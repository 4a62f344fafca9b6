"""Synthetic Toeplitz benchmark, FDP/power scoring and the experiment drivers."""

import functools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .aggregation import AkoConfig, aggregate_runs, bootstrap_runs, map_ordered
from .core_numerics import cholesky, derive_seed, derive_stream, sample_mvn, toeplitz_covariance
from .errors import ConfigError, DataError
from .inference import knockoff_run, vanilla_select
from .knockoffs import estimate_gaussian, gaussian_model

# stream ids for dataset generation, far above any bootstrap id
DESIGN_STREAM = 2**63 + 1
SUPPORT_STREAM = 2**63 + 2
NOISE_STREAM = 2**63 + 3
PAIR_STREAM = 2**63 + 4

# tags for deriving per-run seeds
KO_TAG = 1
AKO_TAG = 2
DATA_TAG = 3


@dataclass(frozen=True)
class SimConfig:
    n: int = 500
    p: int = 1000
    rho: float = 0.5
    sparsity: float = 0.06
    snr: float = 3.0
    master_seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n}")
        if int(self.p) != self.p or self.p < 1:
            raise ConfigError(f"p must be a positive integer, got {self.p}")
        if not (0.0 <= self.rho < 1.0):
            raise ConfigError(f"rho must lie in [0, 1), got {self.rho}")
        if not (0.0 < self.sparsity < 1.0):
            raise ConfigError(f"sparsity must lie in (0, 1), got {self.sparsity}")
        if self.support_size < 1:
            raise ConfigError(f"sparsity {self.sparsity} gives an empty support at p = {self.p}")
        if not self.snr > 0:
            raise ConfigError(f"snr must be positive, got {self.snr}")
        if not (0 <= int(self.master_seed) < 2**64):
            raise ConfigError("master_seed must be a 64-bit unsigned integer")

    @property
    def support_size(self):
        return int(round(self.sparsity * self.p))


@dataclass(frozen=True, eq=False)
class SimDataset:
    x: np.ndarray
    y: np.ndarray
    beta_star: np.ndarray
    support: np.ndarray
    sigma_noise: float
    config: SimConfig

    @property
    def sigma(self):
        return _toeplitz(self.config.rho, self.config.p)


@dataclass(frozen=True)
class SimMetrics:
    fdp: float
    power: float
    selected_count: int


@functools.lru_cache(maxsize=8)
def _toeplitz(rho, p):
    sigma = toeplitz_covariance(rho, p)
    sigma.flags.writeable = False
    return sigma


@functools.lru_cache(maxsize=8)
def _toeplitz_chol(rho, p):
    chol = cholesky(_toeplitz(rho, p))
    chol.flags.writeable = False
    return chol


@functools.lru_cache(maxsize=8)
def oracle_model(rho, p):
    """Knockoff model for the true ``N(0, toeplitz(rho, p))`` design law."""
    return gaussian_model(np.zeros(p), np.array(_toeplitz(rho, p)))


def generate_dataset(config, support_seed=None, null=False):
    """Draw ``(X, y)`` from the Toeplitz linear model.

    ``support_seed`` overrides the seed of the support draw so that several
    datasets can share one support. ``null=True`` gives the global null:
    ``beta* = 0`` and ``y = epsilon``.
    """
    seed = config.master_seed
    n, p = config.n, config.p
    x = sample_mvn(np.zeros(p), _toeplitz_chol(config.rho, p), n, derive_stream(seed, DESIGN_STREAM))
    beta = np.zeros(p)
    if null:
        support = np.array([], dtype=np.int64)
    else:
        support_rng = derive_stream(seed if support_seed is None else support_seed, SUPPORT_STREAM)
        support = np.sort(support_rng.choice(p, config.support_size, replace=False))
        beta[support] = 1.0
    eps = derive_stream(seed, NOISE_STREAM).standard_normal(n)
    signal = x @ beta
    sigma_noise = 1.0 if null else float(np.linalg.norm(signal) / (config.snr * np.linalg.norm(eps)))
    y = signal + sigma_noise * eps
    return SimDataset(x=x, y=y, beta_star=beta, support=support, sigma_noise=sigma_noise, config=config)


def fdp_and_power(selected, support, p):
    """False discovery proportion and power of a selection (0-based indices)."""
    selected = set(int(j) for j in selected)
    support = set(int(j) for j in support)
    for j in selected | support:
        if not 0 <= j < p:
            raise DataError(f"index {j} outside [0, {p})")
    true_pos = len(selected & support)
    fdp = (len(selected) - true_pos) / max(len(selected), 1)
    power = true_pos / len(support) if support else 0.0
    return SimMetrics(fdp=fdp, power=power, selected_count=len(selected))


@dataclass(frozen=True)
class RunRecord:
    experiment: str
    cell: str
    method: str
    run: int
    fdp: float
    power: float
    selected_count: int
    aggregated: bool

    def as_dict(self):
        return dict(self.__dict__)


def _model_for(dataset, oracle):
    cfg = dataset.config
    return oracle_model(cfg.rho, cfg.p) if oracle else estimate_gaussian(dataset.x)


def _ko_metrics(dataset, model, alpha, seed, lambda_policy):
    run = knockoff_run(dataset.x, dataset.y, model, seed, 1, lambda_policy)
    return fdp_and_power(vanilla_select(run.w, alpha), dataset.support, dataset.config.p)


def _ako_runs(dataset, model, ako_config, seed, n_bootstraps=None):
    cfg = replace(ako_config, master_seed=seed)
    return bootstrap_runs(dataset.x, dataset.y, model, cfg, n_bootstraps=n_bootstraps)


def _ako_metrics(dataset, runs, gamma, alpha, fdr_method):
    result = aggregate_runs(runs, gamma, alpha, fdr_method)
    return fdp_and_power(result.selected, dataset.support, dataset.config.p)


def stability_experiment(config, ako_runs, ko_runs, ako_config, threads=1, oracle=True):
    """Repeated KO and AKO runs on one dataset, fresh knockoff seeds per run."""
    dataset = generate_dataset(config)
    model = _model_for(dataset, oracle)
    alpha = ako_config.effective_alpha
    tasks = [("ko", r) for r in range(ko_runs)] + [("ako", r) for r in range(ako_runs)]

    def one(task):
        method, r = task
        if method == "ko":
            seed = derive_seed(config.master_seed, KO_TAG, r)
            m = _ko_metrics(dataset, model, ako_config.alpha, seed, ako_config.lambda_policy)
        else:
            seed = derive_seed(config.master_seed, AKO_TAG, r)
            runs = _ako_runs(dataset, model, ako_config, seed)
            m = _ako_metrics(dataset, runs, ako_config.gamma, alpha, ako_config.fdr_method)
        return RunRecord("stability", "base", method, r, m.fdp, m.power, m.selected_count, method != "ko")

    return map_ordered(one, tasks, threads)


GRID_AXES = ("rho", "sparsity", "snr")
METHODS = ("ko", "ako", "ako-bh", "ako-by")


def _score_run(dataset, model, methods, ako_config, seed, experiment, cell, run):
    records = []
    runs = None
    for method in methods:
        if method == "ko":
            m = _ko_metrics(dataset, model, ako_config.alpha, derive_seed(seed, KO_TAG), ako_config.lambda_policy)
        else:
            if runs is None:
                runs = _ako_runs(dataset, model, ako_config, derive_seed(seed, AKO_TAG))
            fdr = ako_config.fdr_method if method == "ako" else method.split("-")[1]
            m = _ako_metrics(dataset, runs, ako_config.gamma, ako_config.effective_alpha, fdr)
        records.append(RunRecord(experiment, cell, method, run, m.fdp, m.power, m.selected_count, method != "ko"))
    return records


def benchmark_grid(base, vary, values, runs_per_cell, alpha, methods=("ako", "ko"), ako_config=None,
                   threads=1, oracle=True):
    """Vary one of rho, sparsity or snr around ``base``; score each method per run.

    Returns ``(records, summary)``. ``ako-bh`` and ``ako-by`` reuse the same
    bootstraps within a run.
    """
    if vary not in GRID_AXES:
        raise ConfigError(f"vary must be one of {GRID_AXES}, got {vary!r}")
    if not values:
        raise ConfigError("grid is empty")
    if runs_per_cell < 1:
        raise ConfigError("runs_per_cell must be positive")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ConfigError(f"unknown methods {sorted(unknown)}")
    ako_config = replace(ako_config or AkoConfig(), alpha=alpha)
    tasks = []
    for ci, value in enumerate(values):
        cell_cfg = replace(base, **{vary: value})
        for r in range(runs_per_cell):
            tasks.append((ci, f"{vary}={value}", cell_cfg, r))

    def one(task):
        ci, cell, cell_cfg, r = task
        seed = derive_seed(base.master_seed, DATA_TAG, ci, r)
        dataset = generate_dataset(replace(cell_cfg, master_seed=seed))
        model = _model_for(dataset, oracle)
        return _score_run(dataset, model, methods, ako_config, seed, "grid", cell, r)

    records = [rec for recs in map_ordered(one, tasks, threads) for rec in recs]
    return records, summarize(records)


def b_gamma_sweep(base, b_list, gamma_list, runs, alpha, fdr_method="bh", ako_config=None,
                  threads=1, oracle=True):
    """Paired sweep over ``(B, gamma)``.

    Run ``r`` uses one dataset and one set of knockoff streams for every cell;
    a cell with ``B`` bootstraps aggregates streams ``1..B``. This is exactly
    what :func:`run_ako` returns for that cell with the same master seed.
    """
    if not b_list or not gamma_list:
        raise ConfigError("b_list and gamma_list must be nonempty")
    if runs < 1:
        raise ConfigError("runs must be positive")
    ako_config = replace(ako_config or AkoConfig(), alpha=alpha, fdr_method=fdr_method)
    for g in gamma_list:
        replace(ako_config, gamma=g)
    b_max = max(b_list)

    def one(r):
        seed = derive_seed(base.master_seed, DATA_TAG, r)
        dataset = generate_dataset(replace(base, master_seed=seed))
        model = _model_for(dataset, oracle)
        runs_r = _ako_runs(dataset, model, ako_config, derive_seed(seed, AKO_TAG), n_bootstraps=b_max)
        out = []
        for b in b_list:
            for g in gamma_list:
                m = _ako_metrics(dataset, runs_r[:b], g, ako_config.effective_alpha, fdr_method)
                out.append(RunRecord("bgamma", f"B={b},gamma={g}", "ako", r, m.fdp, m.power,
                                     m.selected_count, True))
        return out

    records = [rec for recs in map_ordered(one, range(runs), threads) for rec in recs]
    return records, summarize(records)


def summarize(records):
    """Mean and standard error of FDP and power per ``(experiment, cell, method)``."""
    groups = {}
    for rec in records:
        groups.setdefault((rec.experiment, rec.cell, rec.method), []).append(rec)
    rows = []
    for (experiment, cell, method), recs in groups.items():
        fdp = np.array([r.fdp for r in recs])
        power = np.array([r.power for r in recs])
        k = len(recs)
        rows.append({
            "experiment": experiment,
            "cell": cell,
            "method": method,
            "runs": k,
            "fdr": float(fdp.mean()),
            "fdr_se": float(fdp.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0,
            "power": float(power.mean()),
            "power_se": float(power.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0,
        })
    return rows


@dataclass(frozen=True)
class SpearmanPair:
    pair: tuple
    rho: float
    pvalue: float


def spearman_diagnostic(config, observations, ako_config, max_pairs=1000, threads=1, oracle=True):
    """Spearman correlation between null aggregated p-values across datasets.

    All observations share the support drawn from ``config.master_seed`` and
    draw fresh designs and noise. Null features whose aggregated p-value is
    constant over the observations carry no rank information and are skipped.
    """
    if observations < 10:
        raise ConfigError("need at least 10 observations")
    support = generate_dataset(config).support

    def one(r):
        seed = derive_seed(config.master_seed, DATA_TAG, r)
        dataset = generate_dataset(replace(config, master_seed=seed), support_seed=config.master_seed)
        model = _model_for(dataset, oracle)
        runs = _ako_runs(dataset, model, ako_config, derive_seed(seed, AKO_TAG))
        return aggregate_runs(runs, ako_config.gamma, ako_config.effective_alpha, ako_config.fdr_method).pi_bar

    pi_bar = np.vstack(map_ordered(one, range(observations), threads))
    return spearman_pairs(pi_bar, support, max_pairs, derive_stream(config.master_seed, PAIR_STREAM))


def spearman_pairs(pi_bar, support, max_pairs, rng):
    """Pairwise Spearman statistics over a random subset of null-feature pairs."""
    p = pi_bar.shape[1]
    nulls = np.setdiff1d(np.arange(p), support)
    nulls = nulls[np.ptp(pi_bar[:, nulls], axis=0) > 0]
    m = nulls.size
    if m < 2:
        return []
    total = m * (m - 1) // 2
    picks = rng.choice(total, min(max_pairs, total), replace=False)
    iu, ju = np.triu_indices(m, k=1)
    out = []
    for k in np.sort(picks):
        a, b = nulls[iu[k]], nulls[ju[k]]
        res = stats.spearmanr(pi_bar[:, a], pi_bar[:, b])
        out.append(SpearmanPair((int(a), int(b)), float(res.statistic), float(res.pvalue)))
    return out


def global_null_pool(config, draws, lambda_policy="cv", offset_c=1.0, threads=1, oracle=True):
    """W statistics and intermediate p-values pooled over ``draws`` null datasets.

    Each draw is a fresh global-null dataset (``beta* = 0``) with one knockoff
    draw. Returns ``(w, pi)`` as flat arrays.
    """

    def one(r):
        seed = derive_seed(config.master_seed, DATA_TAG, r)
        dataset = generate_dataset(replace(config, master_seed=seed), null=True)
        model = _model_for(dataset, oracle)
        run = knockoff_run(dataset.x, dataset.y, model, derive_seed(seed, KO_TAG), 1, lambda_policy, offset_c)
        return run.w, run.pi

    out = map_ordered(one, range(draws), threads)
    return np.concatenate([w for w, _ in out]), np.concatenate([pi for _, pi in out])
