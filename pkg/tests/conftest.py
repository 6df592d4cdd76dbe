import numpy as np
import pytest

from projlstd import _rng
from projlstd.chain import MarkovRewardProcess, make_chain, stationary_distribution

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def ring5():
    return make_chain("ring", 5, {"stay": 0.1}, gamma=0.9)


@pytest.fixture
def ring5_mu(ring5):
    return stationary_distribution(ring5)


def random_mrp(seed, n_states, gamma=0.9):
    """Strictly positive random chain with uniform rewards (test-local generator)."""
    rng = _rng.stream(seed, _rng.VERIFY, 7, n_states)
    P = rng.random((n_states, n_states)) + 0.05
    P /= P.sum(axis=1, keepdims=True)
    return MarkovRewardProcess(P, rng.uniform(-1, 1, n_states), gamma)


def dense_stationary(P):
    """Oracle: solve mu^T (P - I) = 0 with sum(mu) = 1 as one least-squares system."""
    n = P.shape[0]
    M = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    return np.linalg.lstsq(M, rhs, rcond=None)[0]
