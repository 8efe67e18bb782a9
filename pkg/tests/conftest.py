import numpy as np
import pytest
from scipy import stats

from lowfreq import SecondOrderSystem


def random_proportional_system(rng: np.random.Generator, n: int | None = None,
                               corank: int | None = None) -> SecondOrderSystem:
    """
    Random SPD mass, PSD stiffness of the given corank and D = beta K.

    K = Q diag(0, ..., 0, lam) Q^T with Haar-random orthogonal Q and
    flexible eigenvalues log-uniform in [0.1, 10], so the conditioning of
    the flexible block is controlled.
    """
    n = int(rng.integers(4, 51)) if n is None else n
    k = int(rng.integers(1, 4)) if corank is None else corank
    Q = stats.ortho_group.rvs(n, random_state=rng)
    lam = np.concatenate([np.zeros(k), 10.0 ** rng.uniform(-1.0, 1.0, n - k)])
    K = (Q * lam) @ Q.T
    A = rng.standard_normal((n, n))
    M = A @ A.T / n + np.eye(n)
    beta = rng.uniform(0.01, 1.0)
    return SecondOrderSystem(0.5 * (M + M.T), beta * 0.5 * (K + K.T), 0.5 * (K + K.T),
                             rng.standard_normal(n), rng.standard_normal(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
