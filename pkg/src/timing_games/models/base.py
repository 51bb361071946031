"""Common container tying a sampler to its subgame catalog, families and deviations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..grid import TimeGrid
from ..payoff import GameProcesses
from ..strategy import StoppingRule


@dataclass
class TimingModel:
    """A scenario-ready game.

    ``sample(n, rng)`` draws a batch of :class:`GameProcesses` started in the
    model's initial state.  ``families`` maps family names to builders
    ``(batch, theta) -> (s1, s2)``.  ``deviation_rules()`` returns the
    model-specific pure rules added to the default deviation class, and
    ``comparator(rule)`` returns closed-form payoffs for a subgame or ``None``.
    """

    name: str
    grid: TimeGrid
    sample: Callable[[int, np.random.Generator], GameProcesses]
    catalog: tuple[StoppingRule, ...]
    regions: tuple[str, ...] = ()
    families: dict[str, Callable] = field(default_factory=dict)
    deviation_rules: Callable[[], list] = list
    comparator: Callable[[StoppingRule], tuple | None] | None = None
    deterministic: bool = False
    chunk_size: int = 2000
    default_family: str = ""
    info: dict = field(default_factory=dict)
