"""Oracle batteries: each compares a library routine against an independent computation.

Every battery returns a list of :class:`OracleCheck` rows so the command
line, the tests and the experiment scripts share one implementation.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .outcome import (
    StageProbabilities,
    mu_L,
    mu_M,
    repeated_stage_closed_form,
    repeated_stage_oracle,
    resolve_outcome,
)
from .payoff import stieltjes_changevar_oracle

STAGE_GRID = 101


@dataclass(frozen=True)
class OracleCheck:
    battery: str
    metric: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _check(battery, metric, value, tol, detail="") -> OracleCheck:
    return OracleCheck(battery, metric, float(value), float(tol), bool(value < tol), detail)


def stage_grid(n: int = STAGE_GRID) -> tuple[np.ndarray, np.ndarray]:
    """Flattened ``n x n`` grid on ``[0, 1]^2`` without the origin."""
    x, y = np.meshgrid(np.linspace(0.0, 1.0, n), np.linspace(0.0, 1.0, n), indexing="ij")
    keep = (x + y) > 0
    return x[keep], y[keep]


def stage_battery(n: int = STAGE_GRID, tol: float = 1e-12) -> list[OracleCheck]:
    """Normalisation of the stage measures and agreement with the summed series."""
    x, y = stage_grid(n)
    lx, ly, m = mu_L(x, y), mu_L(y, x), mu_M(x, y)
    norm = np.max(np.abs(lx + ly + m - 1.0))
    pi, pj, pm = repeated_stage_closed_form(x, y)
    series = max(np.max(np.abs(lx - pi)), np.max(np.abs(ly - pj)), np.max(np.abs(m - pm)))
    return [
        _check("stage", "normalisation_max_error", norm, tol, f"{x.size} grid points"),
        _check("stage", "series_max_error", series, tol, f"{x.size} grid points"),
    ]


def stage_simulation_battery(a_i: float = 0.3, a_j: float = 0.5, trials: int = 1_000_000, seed: int = 0, n_se: float = 4.0) -> list[OracleCheck]:
    """Simulated frequencies against the closed form, in standard errors."""
    sim = repeated_stage_oracle(StageProbabilities(a_i, a_j), "simulate", trials, seed)
    exact = repeated_stage_closed_form(a_i, a_j)
    rows = []
    for name, s, e in zip(("P_i", "P_j", "P_sim"), sim, exact):
        se = np.sqrt(e * (1.0 - e) / trials)
        rows.append(_check("stage_simulation", f"{name}_z", abs(s - e) / se, n_se, f"sim={s:.6f} exact={e:.6f}"))
    return rows


def random_step_fixture(rng: np.random.Generator, steps: int = 50):
    """Nondecreasing ``G`` with plateaus, repeated levels and a sub-unit end; signed ``L``; a window ``[a, b)``."""
    jumps = rng.random(steps) * (rng.random(steps) < 0.4)
    if rng.random() < 0.5:
        jumps[rng.integers(steps)] += rng.random()
    G = np.cumsum(jumps)
    G = G / max(G[-1], 1e-300) * rng.uniform(0.2, 1.0) if G[-1] > 0 else G
    L = rng.normal(size=steps) * rng.uniform(0.1, 10.0)
    a = int(rng.integers(0, steps))
    b = int(rng.integers(a, steps + 1))
    return L, G, a, b


def changevar_battery(seeds: int = 1000, steps: int = 50, tol: float = 1e-9) -> list[OracleCheck]:
    worst = 0.0
    for s in range(seeds):
        direct, inverse = stieltjes_changevar_oracle(*random_step_fixture(np.random.default_rng(s), steps))
        worst = max(worst, abs(direct - inverse))
    return [_check("changevar", "max_abs_difference", worst, tol, f"{seeds} seeds")]


def simultaneous_ratio_fixture(rng: np.random.Generator, K: int = 200):
    """Joint activation at ``tau`` with ``alpha_i(tau) = 0 < alpha_j < 1`` and ``alpha_j`` constant after ``tau``.

    ``alpha_i`` right after ``tau`` is a random sequence in ``(0, 1)``, so its
    right limit need not exist; an explicit onset mask marks ``tau`` active.
    """
    tau = int(rng.integers(0, K // 2))
    aj = float(rng.uniform(0.01, 0.99))
    G = np.zeros(K + 1)
    G[tau:] = 1.0
    if tau > 0:
        G[: tau] = np.sort(rng.uniform(0.0, 0.5, tau))
    Gj = G.copy()
    ai_path = np.zeros(K + 1)
    ai_path[tau + 1 :] = rng.uniform(0.01, 1.0, K - tau)
    ai_path[K] = 1.0
    aj_path = np.zeros(K + 1)
    aj_path[tau:] = aj
    aj_path[K] = 1.0
    onset = np.zeros(K + 1, dtype=bool)
    onset[tau] = True
    return G, Gj, ai_path, aj_path, tau, aj, onset


def simultaneous_ratio_battery(seeds: int = 1000, tol: float = 1e-9) -> list[OracleCheck]:
    worst = 0.0
    for s in range(seeds):
        G_i, G_j, a_i, a_j, tau, aj, onset = simultaneous_ratio_fixture(np.random.default_rng(s))
        out = resolve_outcome(G_i, G_j, a_i, a_j, 0, onset_i=onset)
        if out.case != 4 or out.tau_hat != tau:
            return [OracleCheck("simultaneous_ratio", "max_ratio_error", float("inf"), tol, False, f"seed {s}: case {out.case}")]
        err = abs(out.lambda_M / out.lambda_L_i - aj / (1.0 - aj)) if out.lambda_L_i > 0 else float("inf")
        worst = max(worst, err)
    return [_check("simultaneous_ratio", "max_ratio_error", worst, tol, f"{seeds} seeds")]


def symmetric_half_battery(tol: float = 1e-9) -> list[OracleCheck]:
    """Symmetric preemption at ``tau`` where ``L = F > M``: each player leads with probability 1/2."""
    from .equilibrium import submartingale_preemption_builder
    from .models.fixtures import DeterministicParams, build_deterministic
    from .payoff import batch_payoff
    from .strategy import StoppingRule

    model = build_deterministic(DeterministicParams(symmetric=True, refine_levels=50))
    batch = model.sample(1, None)
    theta = StoppingRule("start").first_index(batch)
    s1, s2 = submartingale_preemption_builder(batch, theta)
    out = resolve_outcome(s1.G[0], s2.G[0], s1.alpha[0], s2.alpha[0], 0, batch.grid.times)
    err = max(abs(out.lambda_L_i - 0.5), abs(out.lambda_L_j - 0.5), abs(out.lambda_M))
    kp = batch.grid.index_at(model.info["tau_p"])
    pay = batch_payoff(batch, s1, s2)[:, 0]
    L, F = batch.L[0, 0, kp], batch.F[0, 0, kp]
    perr = float(np.max(np.abs(pay - 0.5 * (L + F))))
    return [
        _check("symmetric_half", "outcome_max_error", err, tol, f"tau_hat node {out.tau_hat}"),
        _check("symmetric_half", "payoff_max_error", perr, tol),
    ]


def run_all(seed: int = 0, seeds: int = 1000, trials: int = 1_000_000) -> list[OracleCheck]:
    return (
        stage_battery()
        + stage_simulation_battery(trials=trials, seed=seed)
        + changevar_battery(seeds)
        + simultaneous_ratio_battery(seeds)
        + symmetric_half_battery()
    )
