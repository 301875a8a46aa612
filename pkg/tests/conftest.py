import sys

import numpy as np
import pytest

from cellfree_mp.channel import NetworkConfig, derived_stats, estimate_variance, generate_channel, pilot_gram
from cellfree_mp.problem import ReducedProblem, reduce, update_filters


def stats_from_zeta(zeta, rho=1.0, gram=None):
    """Channel statistics for a hand-picked large-scale fading matrix."""
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    L = zeta.shape[1]
    gram = np.eye(L) if gram is None else np.asarray(gram, dtype=float)
    g = estimate_variance(zeta, gram, rho, 1.0)
    return derived_stats(zeta, g, gram)


def random_reduced(rng, L, omega=1.0, p_max=None, scale=1.0):
    """Random positive inverse-SINR coefficients with the structure of a real instance."""
    a = rng.uniform(0.0, 0.3 * scale, size=(L, L))
    np.fill_diagonal(a, 0.0)
    b = rng.uniform(0.0, 0.05 * scale, size=(L, L))
    c = rng.uniform(0.01, 0.5, size=L)
    p_max = rng.uniform(1.0, 20.0) if p_max is None else p_max
    return ReducedProblem(a, b, omega * c, float(omega), float(np.log(omega * p_max)))


def channel_reduced(M, L, seed, omega=None, **kw):
    cfg = NetworkConfig(num_aps=M, num_users=L, rng_seed=seed, **kw)
    stats = generate_channel(cfg)
    p_max = cfg.max_power_norm
    q = update_filters(np.full(L, p_max), stats)
    return reduce(stats, q, 1, float(M) if omega is None else omega, p_max), stats, cfg


def symmetric_pair(omega=1.0, p_max=5.0, a=0.2, b=0.03, c=0.1):
    A = np.array([[0.0, a], [a, 0.0]])
    B = np.full((2, 2), b)
    return ReducedProblem(A, B, np.full(2, omega * c), float(omega), float(np.log(omega * p_max)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
