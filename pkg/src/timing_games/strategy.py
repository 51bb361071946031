"""Extended mixed strategies on a grid, subgame start rules, and their validation.

Arrays are ``(n_paths, K + 1)``: ``K`` finite nodes plus the infinity slot,
where ``G = alpha = 1`` by convention.  A step function's node value applies
on ``[node, next node)``; jumps are ``G(k) - G(k - 1)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionError, ShapeError, ValidationError
from .grid import TimeGrid, first_hit

TC_TOL = 1e-12


@dataclass(frozen=True)
class StoppingRule:
    """A first-hit rule evaluated path by path on a batch.

    kinds:
      ``start``   -- the batch's own start node (index 0 unless shifted)
      ``at_time`` -- first node with time >= ``value``
      ``at_hit``  -- first node in the region named ``value`` (see ``batch.region``)
      ``at_index``-- fixed node index ``value``
      ``never``   -- the infinity slot
    """

    kind: str
    value: float | str | int | None = None

    KINDS = ("start", "at_time", "at_hit", "at_index", "never")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown stopping rule kind {self.kind!r}")

    @property
    def name(self) -> str:
        return self.kind if self.value is None else f"{self.kind}:{self.value}"

    @classmethod
    def parse(cls, text: str) -> "StoppingRule":
        """Parse ``"start"``, ``"never"``, ``"at_time 2.5"``, ``"at_hit P"``, ``"at_index 7"``."""
        parts = text.replace(":", " ").split()
        if not parts:
            raise ValueError("empty stopping rule")
        kind = parts[0]
        if kind in ("start", "never"):
            return cls(kind)
        if len(parts) != 2:
            raise ValueError(f"rule {text!r} needs exactly one argument")
        if kind == "at_time":
            return cls(kind, float(parts[1]))
        if kind == "at_index":
            return cls(kind, int(parts[1]))
        return cls(kind, parts[1])

    def first_index(self, batch, start=0) -> np.ndarray:
        n, K = batch.n_paths, batch.grid.K
        start = np.broadcast_to(np.asarray(start, dtype=np.int64), (n,)).copy()
        if self.kind == "start":
            return start
        if self.kind == "never":
            return np.full(n, K, dtype=np.int64)
        if self.kind == "at_index":
            return np.maximum(start, min(int(self.value), K))
        if self.kind == "at_time":
            return np.maximum(start, batch.grid.index_at(float(self.value)))
        return first_hit(batch.region(str(self.value)), start)


@dataclass(frozen=True)
class ExtendedStrategy:
    """Pair ``(G, alpha)`` for a batch of paths, with subgame start indices ``theta``.

    ``onset`` optionally flags nodes where the extension is zero but becomes
    positive immediately afterwards; when omitted the outcome kernel infers
    such nodes from the samples.
    """

    G: np.ndarray
    alpha: np.ndarray
    theta: np.ndarray
    onset: np.ndarray | None = None

    def __post_init__(self):
        G = np.array(self.G, dtype=float, copy=True)
        a = np.array(self.alpha, dtype=float, copy=True)
        if G.ndim == 1:
            G, a = G[None, :], a[None, :]
        if G.shape != a.shape or G.ndim != 2:
            raise ShapeError(f"G {G.shape} and alpha {a.shape} must share shape (n, K+1)")
        theta = np.broadcast_to(np.asarray(self.theta, dtype=np.int64), (G.shape[0],)).copy()
        G[:, -1] = 1.0
        a[:, -1] = 1.0
        arrays = [G, a, theta]
        if self.onset is not None:
            on = np.array(self.onset, dtype=bool, copy=True).reshape(G.shape)
            object.__setattr__(self, "onset", on)
            arrays.append(on)
        for arr in arrays:
            arr.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "theta", theta)

    @property
    def n_paths(self) -> int:
        return self.G.shape[0]

    @property
    def K(self) -> int:
        return self.G.shape[1] - 1

    @cached_property
    def jumps(self) -> np.ndarray:
        """Jumps ``G(k) - G(k-1)`` at finite nodes, shape ``(n, K)``."""
        K = self.K
        dG = np.empty((self.n_paths, K))
        dG[:, 0] = self.G[:, 0]
        np.subtract(self.G[:, 1:K], self.G[:, : K - 1], out=dG[:, 1:])
        return dG

    @cached_property
    def active_index(self) -> np.ndarray:
        """First node ``>= theta`` where the extension is active (``K`` if never)."""
        from .outcome import first_active_index

        return first_active_index(self.G, self.alpha, self.theta, self.onset)

    def path(self, p: int) -> "ExtendedStrategy":
        on = None if self.onset is None else self.onset[p : p + 1]
        return ExtendedStrategy(self.G[p : p + 1], self.alpha[p : p + 1], self.theta[p : p + 1], on)

    def rows(self, idx) -> "ExtendedStrategy":
        on = None if self.onset is None else self.onset[idx]
        return ExtendedStrategy(self.G[idx], self.alpha[idx], self.theta[idx], on)


@dataclass(frozen=True)
class Violation:
    clause: str
    path: int
    index: int
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def raise_if_invalid(self):
        if self.violations:
            head = "; ".join(f"{v.clause}@path{v.path}/node{v.index}" for v in self.violations[:5])
            raise ValidationError(f"{len(self.violations)} violation(s): {head}", self.violations)


def _first_bad(mask: np.ndarray, clause: str, detail: str = "") -> list[Violation]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = mask.argmax(axis=1)
    return [Violation(clause, int(p), int(cols[p]), detail) for p in rows]


def validate_strategy(s: ExtendedStrategy, atol: float = 0.0) -> ValidationReport:
    """Check feasibility: range, monotone G, G = 0 before the start, alpha > 0 only where G = 1.

    One violation per path and clause is reported (the first offending node).
    """
    G, a = s.G, s.alpha
    n, width = G.shape
    out: list[Violation] = []
    out += _first_bad((G < -atol) | (G > 1 + atol), "range", "G outside [0,1]")
    out += _first_bad((a < -atol) | (a > 1 + atol), "range", "alpha outside [0,1]")
    dec = np.zeros_like(G, dtype=bool)
    dec[:, 1:] = np.diff(G, axis=1) < -atol
    out += _first_bad(dec, "monotonicity", "G decreases")
    before = np.arange(width)[None, :] < s.theta[:, None]
    out += _first_bad(before & (G > atol), "pre_start", "G > 0 before theta")
    out += _first_bad((a > 0) & (G < 1 - atol), "support", "alpha > 0 where G < 1")
    if np.any((s.theta < 0) | (s.theta > width - 1)):
        bad = np.flatnonzero((s.theta < 0) | (s.theta > width - 1))
        out += [Violation("theta", int(p), int(s.theta[p]), "start index off the grid") for p in bad]
    out.sort(key=lambda v: (v.path, v.index, v.clause))
    return ValidationReport(out)


def pure_strategy(tau, theta, K: int) -> ExtendedStrategy:
    """Embed stopping indices as ``G = alpha = 1{t >= tau}``; ``tau = K`` means never."""
    tau = np.atleast_1d(np.asarray(tau, dtype=np.int64))
    theta = np.broadcast_to(np.asarray(theta, dtype=np.int64), tau.shape)
    bad = np.flatnonzero(tau < theta)
    if bad.size:
        raise PreconditionError(f"tau < theta on path {int(bad[0])}")
    step = (np.arange(K + 1)[None, :] >= tau[:, None]).astype(float)
    return ExtendedStrategy(step, step, theta)


def never_strategy(theta, n: int, K: int) -> ExtendedStrategy:
    return pure_strategy(np.full(n, K), theta, K)


Builder = Callable[[object, np.ndarray], "tuple[ExtendedStrategy, ExtendedStrategy]"]


@dataclass(frozen=True)
class StrategyFamily:
    """A strategy pair defined for every subgame start.

    ``builder(batch, theta)`` returns both players' strategies for start
    indices ``theta``; ``catalog`` lists the subgame start rules a scenario
    declares.
    """

    name: str
    builder: Builder
    catalog: tuple[StoppingRule, ...] = ()

    def strategies(self, batch, theta) -> tuple[ExtendedStrategy, ExtendedStrategy]:
        theta = np.broadcast_to(np.asarray(theta, dtype=np.int64), (batch.n_paths,))
        return self.builder(batch, theta)

    def at(self, batch, rule: StoppingRule, start=0):
        return self.strategies(batch, rule.first_index(batch, start))


@dataclass
class ConsistencyReport:
    violations: list[Violation] = field(default_factory=list)
    paths_checked: int = 0

    @property
    def consistent(self) -> bool:
        return not self.violations


def check_time_consistency(
    family: StrategyFamily,
    batch,
    theta: StoppingRule,
    theta_prime: StoppingRule,
    tol: float = TC_TOL,
) -> ConsistencyReport:
    """Bayes-rule consistency of a family between nested subgame starts.

    For every path with ``theta <= theta' < inf`` and both players, checks
    ``G^th(t) = G^th(th'-) + (1 - G^th(th'-)) G^th'(t)`` for finite ``t >= th'``
    and ``alpha^th(t) = alpha^th'(t)`` at every finite node ``t >= th'``.
    """
    k0 = theta.first_index(batch)
    k1 = theta_prime.first_index(batch)
    bad = np.flatnonzero(k0 > k1)
    if bad.size:
        raise PreconditionError(f"theta > theta' on path {int(bad[0])}")
    K = batch.grid.K
    live = k1 < K
    pair0 = family.strategies(batch, k0)
    pair1 = family.strategies(batch, k1)
    cols = np.arange(K)[None, :]
    after = (cols >= k1[:, None]) & live[:, None]
    rows = np.arange(batch.n_paths)
    out: list[Violation] = []
    for player, (s0, s1) in enumerate(zip(pair0, pair1)):
        prev = np.where(k1 > 0, s0.G[rows, np.maximum(k1 - 1, 0)], 0.0)
        required = prev[:, None] + (1.0 - prev[:, None]) * s1.G[:, :K]
        g_bad = after & (np.abs(s0.G[:, :K] - required) > tol)
        a_bad = after & (s0.alpha[:, :K] != s1.alpha[:, :K])
        out += _first_bad(g_bad, "bayes_G", f"player {player + 1}")
        out += _first_bad(a_bad, "alpha_equal", f"player {player + 1}")
    out.sort(key=lambda v: (v.path, v.index, v.clause))
    return ConsistencyReport(out, int(live.sum()))


def check_family_consistency(family: StrategyFamily, batch, theta: StoppingRule, theta_prime: StoppingRule):
    """On paths where both rules select the same node the strategies must coincide."""
    k0 = theta.first_index(batch)
    k1 = theta_prime.first_index(batch)
    same = k0 == k1
    if not same.any():
        return ConsistencyReport([], 0)
    a0 = family.strategies(batch, k0)
    a1 = family.strategies(batch, k1)
    out: list[Violation] = []
    for player in range(2):
        diff = (a0[player].G != a1[player].G) | (a0[player].alpha != a1[player].alpha)
        out += _first_bad(diff & same[:, None], "family", f"player {player + 1}")
    return ConsistencyReport(out, int(same.sum()))


def strategy_to_json(s: ExtendedStrategy, grid: TimeGrid, theta_rule: StoppingRule, paths: Sequence[int] | None = None) -> str:
    """Serialise to ``{grid, paths, G, alpha, theta, theta_rule}``; arrays keep the infinity slot last."""
    paths = list(range(s.n_paths)) if paths is None else list(paths)
    doc = {
        "grid": [float(x) for x in grid.times],
        "paths": paths,
        "G": [[float(v) for v in row] for row in s.G],
        "alpha": [[float(v) for v in row] for row in s.alpha],
        "theta": [int(k) for k in s.theta],
        "theta_rule": theta_rule.name,
    }
    if s.onset is not None:
        doc["onset"] = [[bool(v) for v in row] for row in s.onset]
    return json.dumps(doc, sort_keys=True)


def strategy_from_json(text: str) -> tuple[ExtendedStrategy, TimeGrid, StoppingRule, list[int]]:
    doc = json.loads(text)
    grid = TimeGrid(np.asarray(doc["grid"], dtype=float))
    G = np.asarray(doc["G"], dtype=float)
    a = np.asarray(doc["alpha"], dtype=float)
    if G.ndim != 2 or G.shape[1] != grid.K + 1:
        raise ShapeError(f"G has shape {G.shape}; expected (n, {grid.K + 1})")
    s = ExtendedStrategy(G, a, np.asarray(doc["theta"], dtype=np.int64), doc.get("onset"))
    return s, grid, StoppingRule.parse(doc["theta_rule"]), list(doc["paths"])
