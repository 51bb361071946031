"""Symmetric preemptive market entry driven by a geometric Brownian profit flow."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from ..equilibrium import N_RULES, gbm_entry_builder, state_threshold_rules, submartingale_preemption_builder
from ..errors import ConfigurationError, ModelError, NumericalError
from ..grid import TimeGrid
from ..lattice import gbm_lattice, snell_envelope
from ..payoff import GameProcesses
from ..strategy import StoppingRule
from .base import TimingModel

XP_RESIDUAL = 1e-10


@dataclass(frozen=True)
class GbmEntryParams:
    """Primitives of the entry model; ``m`` is the monopoly markup."""

    r: float = 0.04
    mu: float = 0.02
    sigma: float = 0.2
    I: float = 1.0
    m: float = 2.0
    x0: float = 0.01

    def __post_init__(self):
        if not self.r > max(self.mu, 0.0):
            raise ModelError("need r > max(mu, 0)")
        if not self.m > 1.0:
            raise ModelError("need markup m > 1")
        if not self.I > 0.0:
            raise ModelError("need sunk cost I > 0")
        if self.sigma == 0.0:
            raise ModelError("need sigma != 0")
        if not self.x0 > 0.0:
            raise ModelError("need x0 > 0")


@dataclass(frozen=True)
class GbmClosedForms:
    """Thresholds and undiscounted state functions (multiply by ``exp(-r t)`` for time-``t`` values)."""

    params: GbmEntryParams
    beta1: float
    xF: float
    xP: float

    def _parts(self, x):
        p = self.params
        x = np.asarray(x, dtype=float)
        k = p.r - p.mu
        ratio = np.power(np.minimum(x, self.xF) / self.xF, self.beta1)
        return p, x, k, ratio

    def M_of_x(self, x):
        p, x, k, _ = self._parts(x)
        return x / k - p.I

    def F_of_x(self, x):
        p, x, k, ratio = self._parts(x)
        return np.where(x < self.xF, ratio * (self.xF / k - p.I), x / k - p.I)

    def L_of_x(self, x):
        p, x, k, ratio = self._parts(x)
        below = p.m * x / k - p.I + ratio * (self.xF * (1.0 - p.m) / k)
        return np.where(x < self.xF, below, x / k - p.I)

    def alpha_of_x(self, x):
        """``(L-F)/(L-M)`` on ``(xP, xF)``, 1 on ``[xF, inf)``, 0 below ``xP``."""
        x = np.asarray(x, dtype=float)
        L, F, M = self.L_of_x(x), self.F_of_x(x), self.M_of_x(x)
        inside = (x > self.xP) & (x < self.xF)
        den = np.where(inside, L - M, 1.0)
        return np.where(inside, (L - F) / den, np.where(x >= self.xF, 1.0, 0.0))

    def hitting_value(self, x0: float) -> float:
        """Time-0 value of receiving ``F`` when the state first reaches ``xP`` from ``x0 < xP``."""
        if x0 >= self.xP:
            return float(self.F_of_x(x0))
        return float((x0 / self.xP) ** self.beta1 * self.F_of_x(self.xP))


def beta1(r: float, mu: float, sigma: float) -> float:
    """Positive root above 1 of ``0.5 sigma^2 b (b - 1) + mu b - r``."""
    a = 0.5 * sigma * sigma
    b = mu - a
    disc = b * b + 4.0 * a * r
    return (-b + math.sqrt(disc)) / (2.0 * a)


def gbm_closed_forms(p: GbmEntryParams) -> GbmClosedForms:
    """Follower threshold ``xF`` in closed form, preemption threshold ``xP`` by bracketing root search."""
    b1 = beta1(p.r, p.mu, p.sigma)
    if not b1 > 1.0:
        raise NumericalError(f"root {b1} is not above 1")
    xF = b1 / (b1 - 1.0) * (p.r - p.mu) * p.I
    proto = GbmClosedForms(p, b1, xF, float("nan"))

    def diff(x):
        return float(proto.L_of_x(x) - proto.F_of_x(x))

    lo, hi = xF * 1e-12, xF * (1.0 - 1e-9)
    if not (diff(lo) < 0.0 < diff(hi)):
        raise NumericalError("L - F does not change sign on (0, xF)")
    xP = brentq(diff, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(diff(xP)) >= XP_RESIDUAL:
        raise NumericalError(f"xP residual {abs(diff(xP)):.3g} exceeds {XP_RESIDUAL}")
    return GbmClosedForms(p, b1, xF, float(xP))


def follower_lattice(p: GbmEntryParams, x0: float, steps: int = 2000, horizon: float = 50.0):
    """Lattice, discounted exercise payoff and closed-form terminal value of the follower problem.

    The exercise payoff at ``(t, x)`` is ``exp(-r t)(x/(r-mu) - I)``; the
    terminal slice carries ``exp(-r T) F(x)``, so truncation at ``horizon``
    introduces no bias of its own.
    """
    if horizon <= 0 or steps < 1:
        raise ConfigurationError("lattice needs horizon > 0 and steps >= 1")
    cf = gbm_closed_forms(p)
    lat = gbm_lattice(x0, p.mu, p.sigma, horizon, steps)
    k = p.r - p.mu
    payoff = lat.node_map(lambda s, t: math.exp(-p.r * t) * (s / k - p.I))
    T = lat.grid.times[-1]
    terminal = math.exp(-p.r * T) * cf.F_of_x(lat.states[-1])
    return lat, payoff, terminal, cf


@dataclass(frozen=True)
class LatticeCheck:
    x0: float
    lattice_value: float
    closed_form: float
    rel_error: float
    stop_at_root: bool


def lattice_check(p: GbmEntryParams, states, steps: int = 2000, horizon: float = 50.0) -> list[LatticeCheck]:
    """Snell-envelope follower value from each start state against the closed form ``F(x0)``."""
    rows = []
    for x0 in np.asarray(states, dtype=float):
        lat, payoff, terminal, cf = follower_lattice(p, float(x0), steps, horizon)
        sol = snell_envelope(lat, payoff, terminal)
        exact = float(cf.F_of_x(x0))
        got = sol.root_value
        rows.append(LatticeCheck(float(x0), got, exact, abs(got - exact) / abs(exact), bool(sol.stop_region[0][0])))
    return rows


def check_alpha_continuity(cf: GbmClosedForms, rel: float = 1e-4) -> dict:
    """Intensity just inside ``P`` near both edges; it should approach 0 at ``xP`` and 1 at ``xF``."""
    lo = float(cf.alpha_of_x(cf.xP * (1.0 + rel)))
    hi = float(cf.alpha_of_x(cf.xF * (1.0 - rel)))
    return {"alpha_near_xP": lo, "alpha_near_xF": hi}


def _sampler(p: GbmEntryParams, cf: GbmClosedForms, grid: TimeGrid) -> Callable:
    t = grid.times
    dt = np.diff(t)
    disc = np.exp(-p.r * t)
    drift = (p.mu - 0.5 * p.sigma**2) * dt
    vol = p.sigma * np.sqrt(dt)

    def sample(n: int, rng: np.random.Generator) -> GameProcesses:
        z = rng.standard_normal((n, t.size - 1))
        logx = np.zeros((n, t.size))
        np.cumsum(drift + vol * z, axis=1, out=logx[:, 1:])
        X = p.x0 * np.exp(logx)
        K = t.size
        L = np.zeros((n, K + 1))
        F = np.zeros((n, K + 1))
        M = np.zeros((n, K + 1))
        L[:, :K] = cf.L_of_x(X) * disc
        F[:, :K] = cf.F_of_x(X) * disc
        M[:, :K] = cf.M_of_x(X) * disc
        regions = {"P": (X > cf.xP) & (X < cf.xF), "M": X >= cf.xF}
        regions["PM"] = regions["P"] | regions["M"]
        return GameProcesses(grid, np.stack([L, L]), np.stack([F, F]), np.stack([M, M]), X, regions)

    return sample


def build_gbm_entry(p: GbmEntryParams, horizon: float = 200.0, steps: int = 200, catalog=None, chunk_size: int = 2000, n_rules: int = N_RULES):
    """Monte Carlo model, closed forms, and the entry-model equilibrium builder.

    Payoffs at the infinity slot are 0, the limit of the discounted processes.
    """
    if horizon <= 0 or steps < 1:
        raise ConfigurationError("grid needs horizon > 0 and steps >= 1")
    cf = gbm_closed_forms(p)
    grid = TimeGrid.uniform(horizon, steps)
    catalog = tuple(catalog) if catalog else (StoppingRule("start"), StoppingRule("at_hit", "PM"))
    levels = np.linspace(2.0 * cf.xF / n_rules, 2.0 * cf.xF, n_rules)

    def comparator(rule: StoppingRule):
        if rule.kind == "start" or (rule.kind == "at_hit" and rule.value in ("P", "PM") and p.x0 < cf.xF):
            v = cf.hitting_value(p.x0)
            return (v, v)
        return None

    model = TimingModel(
        name="gbm_entry",
        grid=grid,
        sample=_sampler(p, cf, grid),
        catalog=catalog,
        regions=("P", "M", "PM"),
        families={"gbm_entry": gbm_entry_builder, "submartingale_preemption": submartingale_preemption_builder},
        deviation_rules=lambda: state_threshold_rules(levels),
        comparator=comparator,
        chunk_size=chunk_size,
        default_family="gbm_entry",
        info={"beta1": cf.beta1, "xF": cf.xF, "xP": cf.xP, "x0": p.x0},
    )
    return model, cf
