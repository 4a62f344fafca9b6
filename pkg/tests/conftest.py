import numpy as np
import pytest

from ako.core_numerics import cholesky, derive_stream, sample_mvn, toeplitz_covariance

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def toeplitz_design(n, p, rho, seed):
    return sample_mvn(np.zeros(p), cholesky(toeplitz_covariance(rho, p)), n, derive_stream(seed, 99))
