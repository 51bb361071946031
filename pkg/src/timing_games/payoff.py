"""Subgame payoffs of extended mixed strategies, path by path and by Monte Carlo."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ModelError, PreconditionError, ShapeError
from .grid import TimeGrid
from .outcome import resolve_outcome, resolve_outcomes
from .strategy import ExtendedStrategy, validate_strategy

DEFAULT_CHUNK = 2000


@dataclass
class GameProcesses:
    """Payoff processes for a batch of paths.

    ``L``, ``F``, ``M`` have shape ``(2, n, K + 1)`` (player, path, node) and
    are discounted to time 0.  The last node is the infinity slot, where
    ``F := M`` is enforced.  ``state`` holds the driving state at finite
    nodes, ``regions`` named boolean masks ``(n, K)`` used by hitting rules.
    """

    grid: TimeGrid
    L: np.ndarray
    F: np.ndarray
    M: np.ndarray
    state: np.ndarray | None = None
    regions: dict[str, np.ndarray] = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.L = np.asarray(self.L, dtype=float)
        self.F = np.array(self.F, dtype=float, copy=True)
        self.M = np.asarray(self.M, dtype=float)
        shape = self.L.shape
        if len(shape) != 3 or shape[0] != 2 or self.F.shape != shape or self.M.shape != shape:
            raise ShapeError("L, F, M must share shape (2, n, K+1)")
        if shape[2] != self.grid.K + 1:
            raise ShapeError(f"processes have {shape[2]} columns; grid needs {self.grid.K + 1}")
        self.F[:, :, -1] = self.M[:, :, -1]

    @property
    def n_paths(self) -> int:
        return self.L.shape[1]

    def region(self, name: str) -> np.ndarray:
        try:
            return self.regions[name]
        except KeyError:
            raise KeyError(f"unknown region {name!r}; known: {sorted(self.regions)}") from None

    def rows(self, idx) -> "GameProcesses":
        return GameProcesses(
            self.grid,
            self.L[:, idx],
            self.F[:, idx],
            self.M[:, idx],
            None if self.state is None else self.state[idx],
            {k: v[idx] for k, v in self.regions.items()},
            {k: v[idx] if isinstance(v, np.ndarray) and v.shape[:1] == (self.n_paths,) else v for k, v in self.info.items()},
        )

    def assumption_problems(self, tol: float = 1e-12) -> list[str]:
        """Desk-scale checks: ``F >= M`` everywhere and finite, bounded values."""
        out = []
        if np.any(self.F < self.M - tol):
            p, i, k = np.argwhere(self.F < self.M - tol)[0]
            out.append(f"F < M for player {p + 1} on path {i} at node {k}")
        for name in ("L", "F", "M"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                out.append(f"{name} has non-finite values")
        return out

    def sup_norm(self) -> float:
        return float(max(np.abs(self.L).max(), np.abs(self.F).max(), np.abs(self.M).max()))


@dataclass(frozen=True)
class PayoffEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int | None


def batch_payoff(gp: GameProcesses, s1: ExtendedStrategy, s2: ExtendedStrategy, validate: bool = False, **limit_kw) -> np.ndarray:
    """Payoffs of both players on every path; returns shape ``(2, n)``.

    Integrals over ``[0, tau_hat)`` use the right-continuous value of the
    opponent's ``G`` plus an explicit joint-jump term, so a node where both
    distributions jump contributes ``dG_i dG_j M``.  Mass at ``tau_hat`` is
    carried entirely by the outcome probabilities.  Only nodes where some
    ``G`` jumps contribute, so the sums run over those entries.
    """
    if s1.G.shape != s2.G.shape or s1.G.shape != gp.L.shape[1:]:
        raise ShapeError(f"strategy shapes {s1.G.shape}, {s2.G.shape} vs processes {gp.L.shape[1:]}")
    if validate:
        validate_strategy(s1).raise_if_invalid()
        validate_strategy(s2).raise_if_invalid()
    if np.any(s1.theta != s2.theta):
        raise ShapeError("both strategies must start the same subgame")
    n = gp.n_paths
    ob = resolve_outcomes(
        s1.G, s2.G, s1.alpha, s2.alpha, s1.theta, gp.grid.times, s1.onset, s2.onset,
        active=(s1.active_index, s2.active_index), **limit_kw,
    )
    tau = ob.tau_hat
    d1, d2 = s1.jumps, s2.jumps
    r, c = np.nonzero((d1 != 0) | (d2 != 0))
    keep = c < tau[r]
    r, c = r[keep], c[keep]
    G = (s1.G[r, c], s2.G[r, c])
    dG = (d1[r, c], d2[r, c])
    rows = np.arange(n)
    out = np.empty((2, n))
    for i in (0, 1):
        j = 1 - i
        L, F, M = gp.L[i], gp.F[i], gp.M[i]
        terms = (1.0 - G[j]) * L[r, c] * dG[i] + (1.0 - G[i]) * F[r, c] * dG[j] + dG[i] * dG[j] * M[r, c]
        integral = np.bincount(r, weights=terms, minlength=n)
        at_tau = ob.lambda_L[i] * L[rows, tau] + ob.lambda_L[j] * F[rows, tau] + ob.lambda_M * M[rows, tau]
        out[i] = integral + at_tau
    return out


def path_payoff(gp: GameProcesses, s_i: ExtendedStrategy, s_j: ExtendedStrategy, path: int = 0, player: int = 0, **limit_kw) -> float:
    """Payoff of ``player`` (0 or 1) on one path; ``s_i`` is that player's strategy.

    Loop-based reference implementation of the same functional as
    :func:`batch_payoff`, resolving the outcome with the scalar kernel.
    """
    if player not in (0, 1):
        raise ValueError("player must be 0 or 1")
    for s in (s_i, s_j):
        if s.G.shape[1] != gp.grid.K + 1:
            raise ShapeError("strategy and processes are on different grids")
    si = s_i if s_i.n_paths == 1 else s_i.path(path)
    sj = s_j if s_j.n_paths == 1 else s_j.path(path)
    validate_strategy(si).raise_if_invalid()
    validate_strategy(sj).raise_if_invalid()
    Gi, Gj, ai, aj = si.G[0], sj.G[0], si.alpha[0], sj.alpha[0]
    L, F, M = gp.L[player, path], gp.F[player, path], gp.M[player, path]
    od = resolve_outcome(
        Gi, Gj, ai, aj, int(si.theta[0]), gp.grid.times,
        onset_i=None if si.onset is None else si.onset[0],
        onset_j=None if sj.onset is None else sj.onset[0],
        **limit_kw,
    )
    total = 0.0
    gi_prev = gj_prev = 0.0
    for k in range(od.tau_hat):
        dgi, dgj = Gi[k] - gi_prev, Gj[k] - gj_prev
        total += (1.0 - Gj[k]) * L[k] * dgi + (1.0 - Gi[k]) * F[k] * dgj + dgi * dgj * M[k]
        gi_prev, gj_prev = Gi[k], Gj[k]
    t = od.tau_hat
    return float(total + od.lambda_L_i * L[t] + od.lambda_L_j * F[t] + od.lambda_M * M[t])


def pure_payoff(gp: GameProcesses, tau_i, tau_j, player: int = 0) -> np.ndarray:
    """Three-branch payoff of stopping indices: leader, follower, or simultaneous value."""
    tau_i = np.broadcast_to(np.asarray(tau_i), (gp.n_paths,))
    tau_j = np.broadcast_to(np.asarray(tau_j), (gp.n_paths,))
    rows = np.arange(gp.n_paths)
    L, F, M = gp.L[player], gp.F[player], gp.M[player]
    return np.where(
        tau_i < tau_j,
        L[rows, tau_i],
        np.where(tau_j < tau_i, F[rows, tau_j], M[rows, tau_i]),
    )


Sampler = Callable[[int, np.random.Generator], GameProcesses]


def mc_map(sampler: Sampler, fn: Callable[[GameProcesses], np.ndarray], n_paths: int, seed: int, chunk_size: int = DEFAULT_CHUNK, workers: int = 1) -> np.ndarray:
    """Apply ``fn`` to sampled chunks and concatenate along the last axis.

    Chunk ``c`` always uses the ``c``-th spawned substream of ``seed``, so the
    result does not depend on ``workers``.
    """
    if n_paths < 1:
        raise PreconditionError("n_paths must be >= 1")
    n_chunks = -(-n_paths // chunk_size)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(chunk_size, n_paths - c * chunk_size) for c in range(n_chunks)]

    def run(c):
        return fn(sampler(sizes[c], np.random.default_rng(streams[c])))

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(n_chunks)))
    else:
        parts = [run(c) for c in range(n_chunks)]
    return np.concatenate(parts, axis=-1)


def estimate(values: np.ndarray, seed: int | None = None) -> PayoffEstimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    se = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return PayoffEstimate(float(values.mean()), se, n, seed)


def expected_payoff(
    sampler: Sampler,
    s_i: Callable,
    s_j: Callable,
    theta,
    n_paths: int,
    seed: int,
    player: int = 0,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> PayoffEstimate:
    """Monte Carlo estimate of ``player``'s subgame payoff.

    ``s_i(batch, theta_idx)`` and ``s_j(...)`` build the strategies of
    ``player`` and the opponent on each sampled batch; ``theta`` is a
    :class:`~timing_games.strategy.StoppingRule`.  The sampler is expected
    to start paths in the subgame's initial state.
    """

    def fn(batch):
        k = theta.first_index(batch)
        a, b = s_i(batch, k), s_j(batch, k)
        pair = (a, b) if player == 0 else (b, a)
        return batch_payoff(batch, *pair)[player]

    return estimate(mc_map(sampler, fn, n_paths, seed, chunk_size, workers), seed)


def stieltjes_changevar_oracle(Lpath, Gpath, a: int, b: int) -> tuple[float, float]:
    """Two independent evaluations of ``int_[a,b) |L| dG`` for a nondecreasing step ``G``.

    ``direct`` sums node jumps.  ``inverse`` integrates ``|L(tau_G(x))|`` over
    levels ``x in (0, G_end]`` with the left-continuous inverse
    ``tau_G(x) = min{k : G_k >= x}``, which is constant between consecutive
    distinct levels of ``G``.
    """
    L = np.asarray(Lpath, dtype=float)
    G = np.asarray(Gpath, dtype=float)
    if L.shape != G.shape or G.ndim != 1:
        raise ShapeError("L and G must be 1-D arrays of equal length")
    if np.any(G < 0) or np.any(np.diff(G) < 0):
        raise PreconditionError("G must be nonnegative and nondecreasing")
    dG = np.diff(G, prepend=0.0)
    k = np.arange(G.size)
    inside = (k >= a) & (k < b)
    direct = float(np.sum(np.abs(L) * dG * inside))

    levels = np.unique(np.concatenate(([0.0], G)))
    lo, hi = levels[:-1], levels[1:]
    where = np.searchsorted(G, 0.5 * (lo + hi), side="left")
    keep = (where >= a) & (where < b)
    inverse = float(np.sum((hi - lo)[keep] * np.abs(L[where[keep]])))
    return direct, inverse


def check_processes(gp: GameProcesses):
    problems = gp.assumption_problems()
    if problems:
        raise ModelError("; ".join(problems))
