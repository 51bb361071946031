"""Deterministic preemption fixtures with known first hitting of the preemption region."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..equilibrium import N_RULES, submartingale_preemption_builder, time_rules
from ..errors import ModelError
from ..grid import TimeGrid
from ..payoff import GameProcesses
from ..strategy import StoppingRule
from .base import TimingModel


@dataclass(frozen=True)
class DeterministicParams:
    """Quadratic first-mover advantages over a linear follower value.

    ``L^i = F + k_i (t - s_i)(t_end - t)``, ``F = f0 + f1 t``, ``M = F - gap``.
    Player ``i`` has a first-mover advantage on ``(s_i, t_end)``.  With
    ``symmetric`` both players use player 2's advantage.
    """

    f0: float = 1.0
    f1: float = 0.1
    gap: float = 0.5
    k1: float = 0.1
    s1: float = 2.0
    k2: float = 0.05
    s2: float = 3.0
    t_end: float = 10.0
    horizon: float = 8.0
    step: float = 0.01
    refine_levels: int = 0
    symmetric: bool = False

    def __post_init__(self):
        if self.gap < 0:
            raise ModelError("simultaneous penalty must be nonnegative")
        if not (0 < self.step < self.horizon):
            raise ModelError("need 0 < step < horizon")

    @property
    def tau_p(self) -> float:
        return self.s2 if self.symmetric else max(self.s1, self.s2)


def fixture_grid(p: DeterministicParams) -> TimeGrid:
    """Uniform nodes plus, optionally, ``tau_p + step * 2**-m`` for ``m = 1..refine_levels``."""
    n = int(round(p.horizon / p.step))
    t = np.round(np.arange(n + 1) * p.step, 12)
    if p.refine_levels:
        extra = p.tau_p + p.step * 2.0 ** -np.arange(1, p.refine_levels + 1)
        t = np.union1d(t, extra)
    return TimeGrid(t)


def fixture_processes(p: DeterministicParams, grid: TimeGrid, n: int = 1) -> GameProcesses:
    t = grid.times
    K = t.size
    F = p.f0 + p.f1 * t
    L1 = F + p.k1 * (t - p.s1) * (p.t_end - t)
    L2 = F + p.k2 * (t - p.s2) * (p.t_end - t)
    if p.symmetric:
        L1 = L2
    L = np.zeros((2, n, K + 1))
    Fa = np.zeros((2, n, K + 1))
    M = np.zeros((2, n, K + 1))
    L[0, :, :K] = L1
    L[1, :, :K] = L2
    Fa[:, :, :K] = F
    M[:, :, :K] = F - p.gap
    return GameProcesses(grid, L, Fa, M, np.broadcast_to(t, (n, K)).copy())


def build_deterministic(p: DeterministicParams, catalog=None, n_rules: int = N_RULES) -> TimingModel:
    grid = fixture_grid(p)
    proc = fixture_processes(p, grid)

    def sample(n, rng):
        return fixture_processes(p, grid, n) if n != 1 else proc

    catalog = tuple(catalog) if catalog else (
        StoppingRule("start"),
        StoppingRule("at_time", 1.0),
        StoppingRule("at_time", p.tau_p),
        StoppingRule("at_time", 5.0),
    )

    def comparator(rule: StoppingRule):
        k = rule.first_index(proc)[0]
        kp = grid.index_at(p.tau_p)
        K = grid.K
        if k >= K:
            return None
        if k <= kp:
            if p.symmetric:
                v = 0.5 * (proc.L[0, 0, kp] + proc.F[0, 0, kp])
                return (float(v), float(v))
            return (float(proc.L[0, 0, kp]), float(proc.L[1, 0, kp]))
        return (float(proc.F[0, 0, k]), float(proc.F[1, 0, k]))

    return TimingModel(
        name="deterministic",
        grid=grid,
        sample=sample,
        catalog=catalog,
        families={"submartingale_preemption": submartingale_preemption_builder},
        deviation_rules=lambda: time_rules(np.linspace(0.0, p.horizon, n_rules, endpoint=False)),
        comparator=comparator,
        deterministic=True,
        chunk_size=1,
        default_family="submartingale_preemption",
        info={"tau_p": p.tau_p},
    )
