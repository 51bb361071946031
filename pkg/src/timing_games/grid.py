"""Time grids and first-hit search shared by strategies, solvers and models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing finite node times; index ``K`` is the slot for ``t = inf``."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ShapeError("a time grid needs at least one node")
        if t[0] < 0 or not np.all(np.isfinite(t)):
            raise ShapeError("grid times must be finite and start at t >= 0")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ShapeError("grid times must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, horizon: float, steps: int, start: float = 0.0) -> "TimeGrid":
        return cls(np.linspace(start, start + horizon, steps + 1))

    @property
    def K(self) -> int:
        return int(self.times.size)

    @property
    def inf_index(self) -> int:
        return self.K

    def index_at(self, t: float) -> int:
        """First node with time ``>= t`` (``K`` if ``t`` lies beyond the grid)."""
        return int(np.searchsorted(self.times, t - 1e-12 * max(1.0, abs(t)), side="left"))

    def time_of(self, k) -> np.ndarray:
        k = np.asarray(k)
        ext = np.append(self.times, np.inf)
        return ext[k]

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)

    def __hash__(self):
        return hash(self.times.tobytes())


def first_hit(mask, start=0) -> np.ndarray | int:
    """First index ``k >= start`` where ``mask`` is true; ``len`` of the node axis if never.

    ``mask`` is a boolean array over finite nodes, 1-D for one path or
    ``(n, K)`` for a batch; ``start`` broadcasts over paths.
    """
    m = np.asarray(mask, dtype=bool)
    single = m.ndim == 1
    m = np.atleast_2d(m)
    n, K = m.shape
    start = np.broadcast_to(np.asarray(start, dtype=np.int64), (n,))
    m = m & (np.arange(K)[None, :] >= start[:, None])
    idx = np.where(m.any(axis=1), m.argmax(axis=1), K)
    return int(idx[0]) if single else idx
