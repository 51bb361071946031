import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from timing_games.grid import TimeGrid
from timing_games.payoff import GameProcesses

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_processes(rng, n=1, K=6, gap=0.5):
    """Random processes satisfying F >= M, on a unit-step grid."""
    grid = TimeGrid(np.arange(K, dtype=float))
    L = rng.normal(size=(2, n, K + 1))
    F = rng.normal(size=(2, n, K + 1))
    M = F - rng.uniform(0.0, gap, size=(2, n, K + 1))
    return GameProcesses(grid, L, F, M)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
