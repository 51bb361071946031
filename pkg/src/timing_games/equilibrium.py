"""Preemption equilibria: intensity construction, SPE families and best-reply verification."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, ConsistencyError, DomainError, ShapeError
from .grid import first_hit
from .payoff import GameProcesses, PayoffEstimate, batch_payoff, estimate, mc_map
from .strategy import ExtendedStrategy, StoppingRule, StrategyFamily, pure_strategy

DEFAULT_ABS_TOL = 1e-6
DEFAULT_TOL_SD = 4.0
N_RULES = 32


def indifference_alpha(L, F, M):
    """Opponent intensity ``(L - F) / (L - M)`` that leaves a player indifferent.

    With this ``q``, ``q M + (1 - q) L = F``.  Needs ``L > F`` and ``L > M``.
    """
    L, F, M = (np.asarray(x, dtype=float) for x in (L, F, M))
    if np.any(L <= F):
        raise DomainError("no first-mover advantage: need L > F")
    if np.any(L == M):
        raise DomainError("degenerate payoffs: L == M")
    q = (L - F) / (L - M)
    return float(q) if q.ndim == 0 else q


def preemption_region(L, F) -> np.ndarray:
    """Nodes with ``t = tau^P(t)``.

    Interior nodes have ``min_i (L^i - F^i) > 0``.  A node where the minimum
    is exactly 0 also counts when the next node is interior, which stands in
    for the infimum of an open set being attained on a continuous path.
    ``L`` and ``F`` have shape ``(2, n, K)`` over finite nodes.
    """
    d = np.minimum(L[0] - F[0], L[1] - F[1])
    inner = d > 0
    out = inner.copy()
    out[:, :-1] |= (d[:, :-1] == 0) & inner[:, 1:]
    return out


def preemption_alpha(L, F, M, region) -> np.ndarray:
    """Both players' intensities on ``region``, zero elsewhere; shape ``(2, n, K)``.

    Player ``i`` gets 1 where ``L^j = F^j`` and (``L^i > F^i`` or
    ``F^j = M^j``); otherwise ``1{L^1>F^1} 1{L^2>F^2} (L^j - F^j)/(L^j - M^j)``.
    """
    L, F, M = (np.asarray(x, dtype=float) for x in (L, F, M))
    if not (L.shape == F.shape == M.shape) or L.shape[0] != 2:
        raise ShapeError("L, F, M must share shape (2, ...)")
    dLF = L - F
    both = (dLF[0] > 0) & (dLF[1] > 0)
    out = np.zeros_like(L)
    for i in (0, 1):
        j = 1 - i
        edge = (dLF[j] == 0) & ((dLF[i] > 0) | (F[j] == M[j]))
        den = np.where(both, L[j] - M[j], 1.0)
        inner = np.where(both, dLF[j] / den, 0.0)
        out[i] = np.where(region, np.where(edge, 1.0, inner), 0.0)
    return out


def build_preemption_alpha(gp: GameProcesses, node: int, path: int = 0, theta: int = 0) -> tuple[float, float]:
    """Intensities of both players at ``node`` on one path.

    Raises :class:`ConsistencyError` if ``node`` precedes the first
    preemption node after ``theta``, where intensities must vanish.
    """
    K = gp.grid.K
    L, F, M = (x[:, path : path + 1, :K] for x in (gp.L, gp.F, gp.M))
    reg = preemption_region(L, F)
    tau_p = int(first_hit(reg[0], theta))
    if node < tau_p:
        raise ConsistencyError(f"node {node} precedes the preemption region (first hit {tau_p})")
    a = preemption_alpha(L, F, M, reg)
    return float(a[0, 0, node]), float(a[1, 0, node])


def _zero_before(a: np.ndarray, theta: np.ndarray) -> np.ndarray:
    K = a.shape[1]
    return np.where(np.arange(K)[None, :] >= theta[:, None], a, 0.0)


def _with_inf(a: np.ndarray) -> np.ndarray:
    return np.concatenate([a, np.ones((a.shape[0], 1))], axis=1)


def _step(k: np.ndarray, K: int) -> np.ndarray:
    return (np.arange(K + 1)[None, :] >= k[:, None]).astype(float)


def submartingale_preemption_builder(batch: GameProcesses, theta: np.ndarray):
    """``G^theta = 1{t >= tau^P(theta)}`` for both players, intensities by the preemption rule."""
    K = batch.grid.K
    L, F, M = (x[:, :, :K] for x in (batch.L, batch.F, batch.M))
    reg = preemption_region(L, F)
    tau_p = first_hit(reg, theta)
    a = preemption_alpha(L, F, M, reg)
    G = _step(tau_p, K)
    return tuple(ExtendedStrategy(G, _with_inf(_zero_before(a[i], theta)), theta) for i in (0, 1))


def gbm_entry_builder(batch: GameProcesses, theta: np.ndarray):
    """``G^theta = 1{t >= tau^P ^ tau^M}``; intensity ``(L-F)/(L-M)`` on P, 1 on M, 0 elsewhere."""
    K = batch.grid.K
    P, Mreg = batch.region("P"), batch.region("M")
    stop = first_hit(P | Mreg, theta)
    G = _step(stop, K)
    out = []
    for i in (0, 1):
        j = 1 - i
        L, F, M = batch.L[j, :, :K], batch.F[j, :, :K], batch.M[j, :, :K]
        den = np.where(P, L - M, 1.0)
        a = np.where(P, (L - F) / den, np.where(Mreg, 1.0, 0.0))
        out.append(ExtendedStrategy(G, _with_inf(_zero_before(a, theta)), theta))
    return tuple(out)


REQUIRED_REGIONS = {"submartingale_preemption": (), "gbm_entry": ("P", "M")}


def construct_spe(model, kind: str) -> StrategyFamily:
    """Equilibrium family of ``kind`` for ``model``.

    ``submartingale_preemption`` waits for the preemption region and then
    coordinates by the preemption intensities; ``gbm_entry`` stops on
    ``P`` or ``M`` of the entry model.  Any other ``kind`` is looked up in the
    model's own families.
    """
    catalog = tuple(model.catalog)
    if kind in REQUIRED_REGIONS:
        missing = [r for r in REQUIRED_REGIONS[kind] if r not in model.regions]
        if missing:
            raise ConfigurationError(f"model {model.name!r} lacks regions {missing} needed by {kind!r}")
        builder = submartingale_preemption_builder if kind == "submartingale_preemption" else gbm_entry_builder
        return StrategyFamily(kind, builder, catalog)
    if kind in model.families:
        return StrategyFamily(kind, model.families[kind], catalog)
    raise ConfigurationError(f"unknown equilibrium kind {kind!r} for model {model.name!r}")


@dataclass(frozen=True)
class Deviation:
    """A unilateral deviation: ``build(batch, theta, player, eq_pair)`` returns the deviator's strategy."""

    name: str
    build: Callable[[GameProcesses, np.ndarray, int, tuple], ExtendedStrategy]


def _never(batch, theta, player, eq):
    return pure_strategy(np.full(batch.n_paths, batch.grid.K), theta, batch.grid.K)


def _stop_now(batch, theta, player, eq):
    return pure_strategy(theta, theta, batch.grid.K)


def _stop_now_indifferent(batch, theta, player, eq):
    K = batch.grid.K
    j = 1 - player
    rows = np.arange(batch.n_paths)
    k = np.minimum(theta, K)
    L, F, M = batch.L[j, rows, k], batch.F[j, rows, k], batch.M[j, rows, k]
    ok = (L > F) & (L != M) & (theta < K)
    q = np.where(ok, (L - F) / np.where(ok, L - M, 1.0), 1.0)
    G = _step(theta, K)
    return ExtendedStrategy(G, G * q[:, None], theta)


def _hit_rule(mask_fn, name):
    def build(batch, theta, player, eq):
        tau = first_hit(mask_fn(batch), theta)
        return pure_strategy(tau, theta, batch.grid.K)

    return Deviation(name, build)


def _at_opponent_jump(weight):
    def build(batch, theta, player, eq):
        K = batch.grid.K
        G = eq[1 - player].G[:, :K]
        dG = np.diff(G, axis=1, prepend=0.0) > 0
        tau = first_hit(dG, theta)
        step = _step(tau, K)
        return ExtendedStrategy(step, step * weight, theta)

    return build


@dataclass(frozen=True)
class DeviationClass:
    """Ordered, named list of deviations; the report records the names."""

    name: str
    deviations: tuple[Deviation, ...]

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.deviations]


def state_threshold_rules(levels) -> list[Deviation]:
    """Pure rules 'stop at the first node with state >= level'."""
    return [_hit_rule(lambda b, x=float(x): b.state >= x, f"state>={x:.6g}") for x in levels]


def time_rules(times) -> list[Deviation]:
    """Pure rules 'stop at the first node with time >= t'."""

    def mask(b, t):
        return np.broadcast_to(b.grid.times >= t - 1e-12, (b.n_paths, b.grid.K))

    return [_hit_rule(lambda b, t=float(t): mask(b, t), f"time>={t:.6g}") for t in times]


def default_deviation_class(rules: list[Deviation], name: str = "default") -> DeviationClass:
    """The given rules plus never, stop now (intensity 1 or indifference), and stop at the opponent's first jump."""
    base = [
        Deviation("never", _never),
        Deviation("stop_now", _stop_now),
        Deviation("stop_now_indifferent", _stop_now_indifferent),
        Deviation("at_opponent_jump", _at_opponent_jump(1.0)),
        Deviation("at_opponent_jump_half", _at_opponent_jump(0.5)),
    ]
    return DeviationClass(name, tuple(rules) + tuple(base))


@dataclass(frozen=True)
class DeviationGap:
    player: int
    deviation: str
    gap: float
    std_error: float
    passed: bool


@dataclass
class EquilibriumReport:
    model: str
    family: str
    subgame: str
    payoffs: list[PayoffEstimate]
    gaps: list[DeviationGap]
    deviation_class: str
    deviation_names: list[str]
    abs_tol: float
    tol_sd: float
    comparators: list[float | None] = field(default_factory=lambda: [None, None])

    @property
    def verdict(self) -> bool:
        return all(g.passed for g in self.gaps)

    def worst(self) -> DeviationGap:
        return max(self.gaps, key=lambda g: g.gap - max(self.abs_tol, self.tol_sd * g.std_error))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = "pass" if self.verdict else "fail"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _evaluate(model, family: StrategyFamily, subgame: StoppingRule, deviations: DeviationClass | None, n_paths, seed, chunk_size):
    devs = () if deviations is None else deviations.deviations

    def fn(batch):
        theta = subgame.first_index(batch)
        eq = family.strategies(batch, theta)
        out = np.empty((2, 1 + len(devs), batch.n_paths))
        out[:, 0] = batch_payoff(batch, *eq)
        for d, dev in enumerate(devs):
            for p in (0, 1):
                s = dev.build(batch, theta, p, eq)
                pair = (s, eq[1]) if p == 0 else (eq[0], s)
                out[p, 1 + d] = batch_payoff(batch, *pair)[p]
        return out

    return mc_map(model.sample, fn, n_paths, seed, chunk_size)


def verify_equilibrium(
    model,
    family: StrategyFamily,
    subgame: StoppingRule,
    deviations: DeviationClass,
    n_paths: int,
    seed: int,
    abs_tol: float = DEFAULT_ABS_TOL,
    tol_sd: float = DEFAULT_TOL_SD,
    chunk_size: int | None = None,
) -> EquilibriumReport:
    """Paired best-reply gaps for each player and deviation, opponent held fixed.

    Deviation and equilibrium payoffs use the same paths, so each gap's
    standard error comes from per-path differences.  A gap passes when it is
    at most ``max(abs_tol, tol_sd * SE)``.
    """
    if not deviations.deviations:
        raise ConfigurationError("deviation class is empty")
    if model.deterministic:
        n_paths = 1
    vals = _evaluate(model, family, subgame, deviations, n_paths, seed, chunk_size or model.chunk_size)
    payoffs = [estimate(vals[p, 0], seed) for p in (0, 1)]
    gaps = []
    for p in (0, 1):
        for d, name in enumerate(deviations.names):
            e = estimate(vals[p, 1 + d] - vals[p, 0])
            ok = e.mean <= max(abs_tol, tol_sd * e.std_error)
            gaps.append(DeviationGap(p + 1, name, e.mean, e.std_error, bool(ok)))
    comp = model.comparator(subgame) if model.comparator else None
    return EquilibriumReport(
        model.name,
        family.name,
        subgame.name,
        payoffs,
        gaps,
        deviations.name,
        deviations.names,
        abs_tol,
        tol_sd,
        list(comp) if comp is not None else [None, None],
    )


def equilibrium_payoff(model, family: StrategyFamily, subgame: StoppingRule, n_paths: int, seed: int, chunk_size: int | None = None):
    """Monte Carlo payoffs of both players and the model's closed-form comparators (or ``None``)."""
    if model.deterministic:
        n_paths = 1
    vals = _evaluate(model, family, subgame, None, n_paths, seed, chunk_size or model.chunk_size)
    comp = model.comparator(subgame) if model.comparator else None
    return [estimate(vals[p, 0], seed) for p in (0, 1)], (list(comp) if comp is not None else [None, None])
