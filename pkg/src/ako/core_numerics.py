"""Dense linear algebra helpers, Toeplitz covariances and seeded random streams."""

import numpy as np
from scipy.linalg import lapack

from .errors import DecompositionError, DomainError, ShapeError

_U64 = 2**64


class RngStream:
    """Reproducible random stream keyed by ``(master_seed, stream_id)``.

    Streams are backed by the counter-based Philox generator, keyed through
    ``numpy.random.SeedSequence``. Deriving a stream needs no shared state, so
    bootstrap ``b`` draws the same numbers whatever order the bootstraps run in.
    A stream is meant to be owned by a single task.
    """

    __slots__ = ("master_seed", "stream_id", "generator")

    def __init__(self, master_seed, stream_id):
        master_seed = int(master_seed)
        stream_id = int(stream_id)
        if not (0 <= master_seed < _U64 and 0 <= stream_id < _U64):
            raise DomainError("master_seed and stream_id must be 64-bit unsigned integers")
        self.master_seed = master_seed
        self.stream_id = stream_id
        seq = np.random.SeedSequence([master_seed, stream_id])
        self.generator = np.random.Generator(np.random.Philox(seq))

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"

    def standard_normal(self, size):
        return self.generator.standard_normal(size)

    def uniform(self, size=None):
        return self.generator.random(size)

    def permutation(self, n):
        return self.generator.permutation(n)

    def choice(self, n, size, replace=False):
        return self.generator.choice(n, size=size, replace=replace)


def derive_stream(master_seed, stream_id):
    """Return the stream identified by ``(master_seed, stream_id)``."""
    return RngStream(master_seed, stream_id)


def derive_seed(master_seed, *tags):
    """Hash a master seed and integer tags into a fresh 64-bit seed."""
    words = np.random.SeedSequence([int(master_seed), *map(int, tags)]).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def toeplitz_covariance(rho, p):
    """Covariance with entries ``rho ** |i - j|``."""
    if not (0.0 <= rho < 1.0):
        raise DomainError(f"rho must lie in [0, 1), got {rho}")
    if int(p) != p or p < 1:
        raise DomainError(f"p must be a positive integer, got {p}")
    p = int(p)
    lags = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    sigma = np.power(float(rho), lags)
    # 0 ** 0 == 1 keeps the unit diagonal at rho = 0
    return sigma


def check_covariance(sigma, psd_tol=1e-10):
    """Validate symmetry, positive diagonal and positive semi-definiteness."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] == 0:
        raise ShapeError(f"covariance must be a non-empty square matrix, got shape {sigma.shape}")
    scale = max(np.abs(sigma).max(), 1.0)
    if np.abs(sigma - sigma.T).max() > 1e-12 * scale:
        raise DomainError("covariance is not symmetric")
    if np.any(np.diag(sigma) <= 0):
        raise DomainError("covariance has a non-positive diagonal entry")
    eig = np.linalg.eigvalsh(sigma)
    if eig[0] < -psd_tol * eig[-1]:
        raise DomainError(f"covariance is not positive semi-definite (smallest eigenvalue {eig[0]:.3g})")
    return sigma


def min_eigenvalue(sigma):
    """Smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(sigma)[0])


def cholesky(sigma):
    """Lower Cholesky factor ``L`` with ``L @ L.T == sigma``.

    Raises
    ------
    DecompositionError
        If ``sigma`` is not positive definite; ``.pivot`` holds the 0-based
        index of the first failing pivot.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {sigma.shape}")
    lower, info = lapack.dpotrf(sigma, lower=1, clean=1)
    if info > 0:
        raise DecompositionError(info - 1)
    if info < 0:
        raise DomainError(f"invalid argument passed to dpotrf ({info})")
    return lower


def sample_mvn(mean, chol, n, rng):
    """Draw ``n`` rows from ``N(mean, chol @ chol.T)``."""
    mean = np.asarray(mean, dtype=float)
    chol = np.asarray(chol, dtype=float)
    if chol.ndim != 2 or chol.shape[0] != chol.shape[1]:
        raise ShapeError(f"factor must be square, got shape {chol.shape}")
    if mean.shape != (chol.shape[0],):
        raise ShapeError(f"mean has shape {mean.shape}, factor has shape {chol.shape}")
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    z = rng.standard_normal((int(n), chol.shape[0]))
    return mean + z @ chol.T
