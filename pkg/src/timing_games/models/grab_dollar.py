"""Grab-the-dollar with a stochastic exchange rate for the second player."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..equilibrium import N_RULES, time_rules
from ..errors import ModelError
from ..grid import TimeGrid
from ..payoff import GameProcesses
from ..strategy import ExtendedStrategy, StoppingRule
from .base import TimingModel


@dataclass(frozen=True)
class GrabDollarParams:
    """Discount rate ``r`` and a GBM exchange rate ``X`` with ``X_0 = x0``."""

    r: float = 0.05
    x0: float = 1.0
    mu: float = 0.0
    sigma: float = 0.2

    def __post_init__(self):
        if not self.r > 0:
            raise ModelError("need r > 0")
        if not self.x0 > 0:
            raise ModelError("exchange rate must start positive")


def grab_processes(grid: TimeGrid, X: np.ndarray, r: float) -> GameProcesses:
    """Leader values ``exp(-rt)`` and ``X exp(-rt)``, follower 0, simultaneous ``-exp(-rt)``."""
    X = np.asarray(X, dtype=float)
    if np.any(X <= 0) or not np.all(np.isfinite(X)):
        raise ModelError("exchange rate samples must be positive and finite")
    n, K = X.shape
    disc = np.exp(-r * grid.times)
    L = np.zeros((2, n, K + 1))
    M = np.zeros((2, n, K + 1))
    L[0, :, :K] = disc
    L[1, :, :K] = X * disc
    M[:, :, :K] = -disc
    regions = {"X_high": X >= 1.2, "X_low": X <= 0.8}
    return GameProcesses(grid, L, np.zeros_like(L), M, X, regions)


def grab_dollar_builder(batch: GameProcesses, theta: np.ndarray):
    """Grab immediately; player 1 mixes with ``X/(1+X)``, player 2 with 1/2."""
    K = batch.grid.K
    on = (np.arange(K + 1)[None, :] >= theta[:, None]).astype(float)
    X = np.concatenate([batch.state, np.ones((batch.n_paths, 1))], axis=1)
    a1 = on * X / (1.0 + X)
    a2 = on * 0.5
    return ExtendedStrategy(on, a1, theta), ExtendedStrategy(on, a2, theta)


def build_grab_dollar(p: GrabDollarParams, horizon: float = 10.0, steps: int = 100, catalog=None, chunk_size: int = 5000, n_rules: int = N_RULES) -> TimingModel:
    grid = TimeGrid.uniform(horizon, steps)
    t = grid.times
    dt = np.diff(t)

    def sample(n, rng):
        z = rng.standard_normal((n, t.size - 1))
        logx = np.zeros((n, t.size))
        np.cumsum((p.mu - 0.5 * p.sigma**2) * dt + p.sigma * np.sqrt(dt) * z, axis=1, out=logx[:, 1:])
        return grab_processes(grid, p.x0 * np.exp(logx), p.r)

    catalog = tuple(catalog) if catalog else (
        StoppingRule("start"),
        StoppingRule("at_time", horizon / 4),
        StoppingRule("at_hit", "X_high"),
        StoppingRule("at_hit", "X_low"),
    )
    return TimingModel(
        name="grab_dollar",
        grid=grid,
        sample=sample,
        catalog=catalog,
        regions=("X_high", "X_low"),
        families={"grab_dollar": grab_dollar_builder},
        deviation_rules=lambda: time_rules(np.linspace(0.0, horizon, n_rules, endpoint=False)),
        comparator=lambda rule: (0.0, 0.0),
        chunk_size=chunk_size,
        default_family="grab_dollar",
        info={"r": p.r, "x0": p.x0},
    )
