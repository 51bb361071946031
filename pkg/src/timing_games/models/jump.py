"""Two-firm entry where the laggard catches up at an exponential time ``T``.

The leader value of the laggard jumps up at ``T``; before ``T`` it decays.
The preemption region is ``{t >= T}``, yet equilibria stop before reaching it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..equilibrium import N_RULES, submartingale_preemption_builder, time_rules
from ..errors import ModelError
from ..grid import TimeGrid
from ..payoff import GameProcesses
from ..strategy import ExtendedStrategy, StoppingRule
from .base import TimingModel


@dataclass(frozen=True)
class JumpModelParams:
    """Discount rate ``r``, catch-up hazard ``lam``, follower value ``c`` and simultaneous penalty."""

    r: float = 1.0
    lam: float = 1.0
    c: float = 1.2
    penalty: float = 0.1
    stopper: int = 1

    def __post_init__(self):
        if not (self.r > 0 and self.lam > 0):
            raise ModelError("need r > 0 and lam > 0")
        if not (1.0 <= self.c < 1.0 + self.b):
            raise ModelError(f"need c in [1, 1 + b) = [1, {1.0 + self.b:.6g})")
        if self.penalty < 0:
            raise ModelError("penalty must be nonnegative")
        if self.stopper not in (1, 2):
            raise ModelError("stopper must be player 1 or 2")

    @property
    def a(self) -> float:
        return 2.0 + self.r / self.lam

    @property
    def b(self) -> float:
        return self.r / (self.r + self.lam)


def _exact(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def jump_diagnostics(p: JumpModelParams) -> dict:
    """Closed-form checks in exact rational arithmetic on the decimal inputs.

    ``payoff_bound`` is the largest total payoff from waiting until ``T``,
    ``immediate_total`` the total from one firm stopping at 0, and
    ``mixing_rate_bound`` compares the bounded hazard of continuous mixing
    after ``T`` with the level that would exhaust both distributions.
    """
    r, lam, c = _exact(p.r), _exact(p.lam), _exact(p.c)
    a = 2 + r / lam
    b = r / (r + lam)
    bound = a - (b - c) * lam / (r + lam)
    total = a - b + 1
    hw_lhs = 1 / (a - b - c)
    hw_rhs = lam * (r + lam) / (r * r + lam * lam)
    return {
        "a": a,
        "b": b,
        "payoff_bound": bound,
        "immediate_total": total,
        "wait_profile_rejected": bound < total,
        "submartingale_condition": a >= (1 + b) + r / lam,
        "mixing_lhs": hw_lhs,
        "mixing_rhs": hw_rhs,
        "mixing_leaves_mass": hw_lhs < hw_rhs,
    }


def conditional_means(p: JumpModelParams, s: float, t: float) -> dict:
    """On ``{s < T}``: conditional means at ``t`` of the laggard's leader value and of both
    stop-before-T processes ``L^i 1{t<T} + F_T 1{t>=T}``."""
    a, b, r, lam, c = p.a, p.b, p.r, p.lam, p.c
    surv = math.exp(-lam * (t - s))
    tail = math.exp(-r * s) * c * lam / (r + lam) * (1.0 - math.exp(-(r + lam) * (t - s)))
    return {
        "L2": math.exp(-r * t) * surv + (a - math.exp(-r * t) * b) * (1.0 - surv),
        "X1": (a - math.exp(-r * t) * b) * surv + tail,
        "X2": math.exp(-r * t) * surv + tail,
        "L1_s": a - math.exp(-r * s) * b,
        "L2_s": math.exp(-r * s),
    }


def _intensities(batch: GameProcesses, theta: np.ndarray) -> list[np.ndarray]:
    """Indifference intensities from ``T`` on, zero before ``T`` and before ``theta``."""
    K = batch.grid.K
    post = batch.region("P")
    live = np.arange(K)[None, :] >= theta[:, None]
    out = []
    for i in (0, 1):
        j = 1 - i
        L, F, M = batch.L[j, :, :K], batch.F[j, :, :K], batch.M[j, :, :K]
        q = np.where(post & live, (L - F) / np.where(post, L - M, 1.0), 0.0)
        out.append(np.concatenate([q, np.ones((batch.n_paths, 1))], axis=1))
    return out


def immediate_stop_builder(stopper: int):
    """Firm ``stopper`` stops at once, the other waits for ``T``; both preempt after ``T``."""
    s = stopper - 1

    def build(batch: GameProcesses, theta: np.ndarray):
        K = batch.grid.K
        kT = batch.info["kT"]
        a = _intensities(batch, theta)
        cols = np.arange(K + 1)[None, :]
        G_now = (cols >= theta[:, None]).astype(float)
        G_wait = (cols >= np.maximum(theta, kT)[:, None]).astype(float)
        # the extension jumps at T between nodes: no onset inference
        off = np.zeros((batch.n_paths, K + 1), dtype=bool)
        pair = [None, None]
        pair[s] = ExtendedStrategy(G_now, a[s], theta, off)
        pair[1 - s] = ExtendedStrategy(G_wait, a[1 - s], theta, off)
        return tuple(pair)

    return build


def jump_processes(grid: TimeGrid, T: np.ndarray, p: JumpModelParams) -> GameProcesses:
    t = grid.times
    K = t.size
    n = T.size
    kT = np.searchsorted(t, T, side="left")  # first node with t >= T, K if beyond the grid
    post = np.arange(K)[None, :] >= kT[:, None]
    disc = np.exp(-p.r * t)[None, :]
    lead = np.broadcast_to(p.a - disc * p.b, (n, K))
    L = np.zeros((2, n, K + 1))
    F = np.zeros((2, n, K + 1))
    M = np.zeros((2, n, K + 1))
    L[0, :, :K] = lead
    L[1, :, :K] = np.where(post, lead, np.broadcast_to(disc, (n, K)))
    L[:, :, K] = p.a
    F[:, :, :K] = p.c * disc
    M[:, :, :K] = (p.c - p.penalty) * disc
    info = {"T": T, "kT": kT}
    return GameProcesses(grid, L, F, M, post.astype(float), {"P": post, "pre": ~post}, info)


def stop_before_T(batch: GameProcesses, r: float, c: float, player: int) -> np.ndarray:
    """``L^i_t`` before ``T`` and the follower value frozen at the exact ``T`` afterwards."""
    K = batch.grid.K
    T = batch.info["T"]
    post = batch.region("P")
    frozen = (np.exp(-r * T) * c)[:, None]
    X = np.where(post, frozen, batch.L[player, :, :K])
    return np.concatenate([X, X[:, -1:]], axis=1)


def build_jump_model(p: JumpModelParams, horizon: float = 20.0, steps: int = 400, catalog=None, chunk_size: int = 5000, n_rules: int = N_RULES):
    """Monte Carlo model and diagnostics.

    ``T`` is sampled exactly and snapped up to the next node; node values of
    the leader processes therefore match the continuous-time processes at the
    nodes.  Simultaneous stopping pays ``F - penalty * exp(-rt)``.
    """
    grid = TimeGrid.uniform(horizon, steps)

    def sample(n, rng):
        return jump_processes(grid, rng.exponential(1.0 / p.lam, n), p)

    catalog = tuple(catalog) if catalog else (
        StoppingRule("start"),
        StoppingRule("at_time", 1.0),
        StoppingRule("at_hit", "P"),
    )

    model = TimingModel(
        name="jump",
        grid=grid,
        sample=sample,
        catalog=catalog,
        regions=("P", "pre"),
        families={
            "immediate_stop": immediate_stop_builder(p.stopper),
            "wait_until_T": submartingale_preemption_builder,
        },
        deviation_rules=lambda: time_rules(np.linspace(0.0, horizon / 4, n_rules, endpoint=False)),
        comparator=None,
        chunk_size=chunk_size,
        default_family="immediate_stop",
        info={"a": p.a, "b": p.b},
    )
    return model, jump_diagnostics(p)
