"""Optimal stopping on recombining lattices, region hitting times, and drift tests."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import LatticeError, PreconditionError, ShapeError
from .grid import TimeGrid, first_hit
from .strategy import StoppingRule

PROB_TOL = 1e-12
STOP_TOL = 1e-12


@dataclass(frozen=True)
class MarkovLattice:
    """Recombining binomial lattice.

    Slice ``n`` has ``n + 1`` states; node ``(n, j)`` moves to ``(n+1, j+1)``
    with ``p_up[n][j]`` and to ``(n+1, j)`` with ``p_down[n][j]``.  Payoffs
    passed to solvers are already discounted, so no discounting happens here.
    """

    grid: TimeGrid
    states: tuple[np.ndarray, ...]
    p_up: tuple[np.ndarray, ...]
    p_down: tuple[np.ndarray, ...]

    def __post_init__(self):
        N = self.grid.K - 1
        if len(self.states) != N + 1 or len(self.p_up) != N or len(self.p_down) != N:
            raise ShapeError("need K state slices and K - 1 transition slices")
        for n, s in enumerate(self.states):
            if np.shape(s) != (n + 1,):
                raise ShapeError(f"slice {n} must hold {n + 1} states")
        for n, (u, d) in enumerate(zip(self.p_up, self.p_down)):
            u, d = np.asarray(u), np.asarray(d)
            if u.shape != (n + 1,) or d.shape != (n + 1,):
                raise ShapeError(f"transition slice {n} must hold {n + 1} nodes")
            if np.any(u < 0) or np.any(d < 0) or np.any(np.abs(u + d - 1.0) > PROB_TOL):
                j = int(np.argmax((u < 0) | (d < 0) | (np.abs(u + d - 1.0) > PROB_TOL)))
                raise LatticeError(f"transition probabilities at node ({n}, {j}) do not form a distribution")

    @property
    def steps(self) -> int:
        return self.grid.K - 1

    def expect_next(self, n: int, values_next: np.ndarray) -> np.ndarray:
        return self.p_up[n] * values_next[1:] + self.p_down[n] * values_next[:-1]

    def node_map(self, fn: Callable[[np.ndarray, float], np.ndarray]) -> list[np.ndarray]:
        """Evaluate ``fn(states, t)`` on every slice."""
        return [np.asarray(fn(s, t), dtype=float) for s, t in zip(self.states, self.grid.times)]


def gbm_lattice(x0: float, mu: float, sigma: float, horizon: float, steps: int) -> MarkovLattice:
    """Binomial GBM lattice with ``u = exp(sigma sqrt(dt))``, ``d = 1/u`` and mean-matching ``p``."""
    if x0 <= 0 or sigma == 0 or horizon <= 0 or steps < 1:
        raise PreconditionError("need x0 > 0, sigma != 0, horizon > 0, steps >= 1")
    dt = horizon / steps
    u = float(np.exp(abs(sigma) * np.sqrt(dt)))
    d = 1.0 / u
    p = (np.exp(mu * dt) - d) / (u - d)
    if not 0.0 <= p <= 1.0:
        raise LatticeError(f"step too coarse: up probability {p:.6g} outside [0, 1]")
    grid = TimeGrid.uniform(horizon, steps)
    states = tuple(x0 * u ** (2.0 * np.arange(n + 1) - n) for n in range(steps + 1))
    ups = tuple(np.full(n + 1, p) for n in range(steps))
    downs = tuple(np.full(n + 1, 1.0 - p) for n in range(steps))
    return MarkovLattice(grid, states, ups, downs)


@dataclass
class SnellSolution:
    value: list[np.ndarray]
    stop_region: list[np.ndarray]
    rule: StoppingRule

    @property
    def root_value(self) -> float:
        return float(self.value[0][0])


def snell_envelope(lat: MarkovLattice, payoff: Sequence[np.ndarray], terminal: np.ndarray) -> SnellSolution:
    """Backward induction ``V_n = max(payoff_n, E[V_{n+1}])`` with ``V_N = terminal``.

    ``stop_region`` marks nodes where the payoff attains the value within
    ``STOP_TOL`` relative to the node's own value; on the last slice it marks
    ``payoff >= terminal``.  The rule is the first hit of that region.
    """
    N = lat.steps
    if len(payoff) != N + 1:
        raise ShapeError("payoff must have one array per slice")
    terminal = np.asarray(terminal, dtype=float)
    if terminal.shape != (N + 1,):
        raise ShapeError("terminal must match the last slice")
    value: list[np.ndarray] = [None] * (N + 1)  # type: ignore[list-item]
    stop: list[np.ndarray] = [None] * (N + 1)  # type: ignore[list-item]
    last = np.asarray(payoff[N], dtype=float)
    value[N] = np.maximum(last, terminal)
    stop[N] = last >= value[N] - STOP_TOL * np.maximum(1.0, np.abs(value[N]))
    for n in range(N - 1, -1, -1):
        p = np.asarray(payoff[n], dtype=float)
        if p.shape != (n + 1,):
            raise ShapeError(f"payoff slice {n} must hold {n + 1} values")
        cont = lat.expect_next(n, value[n + 1])
        value[n] = np.maximum(p, cont)
        stop[n] = p >= value[n] - STOP_TOL * np.maximum(1.0, np.abs(value[n]))
    return SnellSolution(value, stop, StoppingRule("at_hit", "stop"))


def hitting_time(path_or_batch, region, start=0):
    """First node ``>= start`` where ``region`` holds; the infinity slot ``K`` if never.

    ``region`` is a boolean mask over the nodes or a predicate applied to the
    state array.  Accepts one path ``(K,)`` or a batch ``(n, K)``.
    """
    states = np.asarray(path_or_batch)
    mask = region(states) if callable(region) else np.asarray(region, dtype=bool)
    if mask.shape != states.shape:
        raise ShapeError("region mask must match the path shape")
    return first_hit(mask, start)


def lattice_hitting_time(lat: MarkovLattice, region: Sequence[np.ndarray], moves: np.ndarray, start: int = 0) -> np.ndarray:
    """Hitting times along lattice paths given by up-move indicators ``moves`` of shape ``(n, N)``."""
    moves = np.asarray(moves, dtype=np.int64)
    j = np.concatenate([np.zeros((moves.shape[0], 1), dtype=np.int64), np.cumsum(moves, axis=1)], axis=1)
    mask = np.stack([np.asarray(region[n])[j[:, n]] for n in range(lat.steps + 1)], axis=1)
    return first_hit(mask, start)


@dataclass(frozen=True)
class DriftBucket:
    low: float
    high: float
    count: int
    mean_increment: float
    std_error: float
    sign: int | None


@dataclass
class DriftResult:
    pair: tuple[int, int]
    verdict: str
    buckets: list[DriftBucket] = field(default_factory=list)

    @property
    def strict(self) -> bool:
        """Some bucket is strictly signed and none has the opposite sign."""
        return self.verdict in ("submartingale", "supermartingale")

    @property
    def strict_everywhere(self) -> bool:
        signs = [b.sign for b in self.buckets if b.sign is not None]
        return bool(signs) and self.strict and all(s != 0 for s in signs)


ATOM_SHARE = 0.05


def _buckets(x: np.ndarray, n_quantiles: int = 10) -> np.ndarray:
    """Bucket labels: atoms holding at least 5% of paths get their own bucket, the rest deciles."""
    labels = np.full(x.size, -1, dtype=np.int64)
    uniq, counts = np.unique(x, return_counts=True)
    if uniq.size <= n_quantiles:
        return np.searchsorted(uniq, x)
    atoms = uniq[counts >= ATOM_SHARE * x.size]
    nxt = 0
    for a in atoms:
        labels[x == a] = nxt
        nxt += 1
    rest = labels < 0
    if rest.any():
        edges = np.unique(np.quantile(x[rest], np.linspace(0, 1, n_quantiles + 1)[1:-1]))
        labels[rest] = nxt + np.searchsorted(edges, x[rest], side="right")
    return labels


def drift_classify(
    sampler: Callable,
    process: Callable,
    pairs: Sequence[tuple[int, int]],
    n_paths: int,
    seed: int,
    tol_sd: float = 4.0,
    state: Callable | None = None,
    chunk_size: int = 20_000,
) -> list[DriftResult]:
    """Classify the conditional drift ``E[X_t - X_s | state at s]`` for each pair.

    ``process(batch)`` returns node values ``(n, K+1)``; ``state(batch)``
    returns the conditioning state ``(n, K)`` and defaults to the process
    itself.  Per bucket the sign is ``+1``/``-1`` when the mean increment
    exceeds ``tol_sd`` standard errors (plus a rounding floor), ``0`` when
    within, and ``None`` when the bucket has fewer than two paths.  Verdicts:
    all zero gives ``martingale``, nonnegative with a positive bucket gives
    ``submartingale``, the mirror case ``supermartingale``, otherwise
    ``inconclusive``.
    """
    from .payoff import mc_map

    if n_paths < 100:
        raise PreconditionError("drift classification needs at least 100 paths")
    pairs = [(int(s), int(t)) for s, t in pairs]
    for s, t in pairs:
        if not s < t:
            raise PreconditionError(f"pair ({s}, {t}) must satisfy s < t")
    ss = np.array([p[0] for p in pairs])
    tt = np.array([p[1] for p in pairs])

    def fn(batch):
        X = np.asarray(process(batch), dtype=float)
        S = X if state is None else np.asarray(state(batch), dtype=float)
        return np.stack([S[:, ss].T, (X[:, tt] - X[:, ss]).T])  # (2, pairs, n)

    data = mc_map(sampler, fn, n_paths, seed, chunk_size)
    out = []
    for q, pair in enumerate(pairs):
        s_val, inc = data[0, q], data[1, q]
        labels = _buckets(s_val)
        floor = 1e-12 * max(1.0, float(np.max(np.abs(inc))))
        buckets = []
        for lab in np.unique(labels):
            sel = labels == lab
            cnt = int(sel.sum())
            if cnt < 2:
                buckets.append(DriftBucket(float(s_val[sel].min()), float(s_val[sel].max()), cnt, float(inc[sel].mean()), float("nan"), None))
                continue
            m = float(inc[sel].mean())
            se = float(inc[sel].std(ddof=1) / np.sqrt(cnt))
            band = tol_sd * se + floor
            sign = 1 if m > band else (-1 if m < -band else 0)
            buckets.append(DriftBucket(float(s_val[sel].min()), float(s_val[sel].max()), cnt, m, se, sign))
        signs = [b.sign for b in buckets if b.sign is not None]
        if not signs:
            verdict = "inconclusive"
        elif all(v == 0 for v in signs):
            verdict = "martingale"
        elif all(v >= 0 for v in signs):
            verdict = "submartingale"
        elif all(v <= 0 for v in signs):
            verdict = "supermartingale"
        else:
            verdict = "inconclusive"
        out.append(DriftResult(pair, verdict, buckets))
    return out


def lattice_to_csv(lat: MarkovLattice, sol: SnellSolution, payoff: Sequence[np.ndarray] | None = None) -> str:
    """Rows ``slice, time, state, value, stop`` (and ``payoff`` when given), 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["slice", "time", "state", "value", "stop"] + (["payoff"] if payoff is not None else [])
    w.writerow(head)
    for n, (s, v, st) in enumerate(zip(lat.states, sol.value, sol.stop_region)):
        t = "%.17g" % lat.grid.times[n]
        for j in range(n + 1):
            row = [n, t, "%.17g" % s[j], "%.17g" % v[j], int(st[j])]
            if payoff is not None:
                row.append("%.17g" % payoff[n][j])
            w.writerow(row)
    return buf.getvalue()
