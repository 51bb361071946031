"""Stage-outcome measures and resolution of who stops first at the decisive instant.

Grid conventions used throughout the package: a path is sampled at ``K``
finite nodes followed by one terminal slot standing for ``t = inf``, so every
per-path array has ``K + 1`` entries.  ``G`` at a node is its right-continuous
value; ``G(k-)`` is the value at node ``k - 1`` (zero before the first node).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError, EmptyLimitError, ShapeError, ValidationError

MASS_TOL = 1e-12
DEFAULT_WINDOW_STEPS = 64
DEFAULT_SHRINK = 0.5
DEFAULT_LIMIT_TOL = 1e-6


@dataclass(frozen=True)
class StageProbabilities:
    a_i: float
    a_j: float

    def __post_init__(self):
        for name in ("a_i", "a_j"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class OutcomeDistribution:
    """Outcome masses at ``tau_hat`` for one path.

    ``residual`` is the mass that survives to ``tau_hat`` without anyone
    stopping strictly before it, ``(1 - G_i(tau_hat-)) (1 - G_j(tau_hat-))``;
    the three lambdas partition it.  ``case`` records which branch fired
    (1: only i's extension is active, 2: only j's, 3: joint with a sure stop
    or both positive, 4: joint right-limit case, 0: terminal slot).
    """

    tau_hat: int
    lambda_L_i: float
    lambda_L_j: float
    lambda_M: float
    residual: float
    case: int
    limit_converged: bool | None = None


@dataclass(frozen=True)
class RightLimitEstimate:
    liminf_est: float
    limsup_est: float
    converged: bool
    window_count: int


def _check_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x < 0) | (x > 1) | (y < 0) | (y > 1)):
        raise DomainError("stage probabilities must lie in [0, 1]")
    if np.any((x == 0) & (y == 0)):
        raise DomainError("mu_L has no continuous extension at the origin (0, 0)")
    return x, y


def mu_L(x, y):
    """Probability that the player using ``x`` stops first in the repeated stage game."""
    x, y = _check_pair(x, y)
    out = x * (1.0 - y) / (x + y - x * y)
    return float(out) if out.ndim == 0 else out


def mu_M(x, y):
    """Probability of simultaneous stopping in the repeated stage game."""
    x, y = _check_pair(x, y)
    out = x * y / (x + y - x * y)
    return float(out) if out.ndim == 0 else out


def stage_outcome_measures(p: StageProbabilities) -> tuple[float, float, float]:
    """Return ``(mu_L(a_i, a_j), mu_L(a_j, a_i), mu_M(a_i, a_j))``."""
    return mu_L(p.a_i, p.a_j), mu_L(p.a_j, p.a_i), mu_M(p.a_i, p.a_j)


def geometric_sum(q):
    """``sum_{k>=0} q**k`` for ``0 <= q < 1`` by repeated squaring.

    Uses ``sum_{k < 2**m} q**k = prod_{j < m} (1 + q**(2**j))`` and keeps
    squaring until the next factor is 1 in floating point, so the partial sum
    agrees with the infinite series to machine precision.
    """
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q >= 1)):
        raise DomainError("geometric ratio must lie in [0, 1)")
    total = np.ones_like(q)
    power = q.copy()
    while np.any(power > 0):
        total = total * (1.0 + power)
        power = np.where(power * power < 1e-300, 0.0, power * power)
    return float(total) if total.ndim == 0 else total


def repeated_stage_closed_form(a_i, a_j):
    """``(P_i_first, P_j_first, P_simultaneous)`` from the series over silent rounds."""
    a = np.asarray(a_i, dtype=float)
    b = np.asarray(a_j, dtype=float)
    if np.any((a == 0) & (b == 0)):
        raise DomainError("both stage probabilities are zero; the game never ends")
    s = geometric_sum((1.0 - a) * (1.0 - b))
    out = (a * (1.0 - b) * s, b * (1.0 - a) * s, a * b * s)
    if np.ndim(out[0]) == 0:
        return tuple(float(x) for x in out)
    return out


def repeated_stage_oracle(
    p: StageProbabilities,
    mode: Literal["closed_form", "simulate"] = "closed_form",
    trials: int = 0,
    seed: int | None = None,
    chunk: int = 200_000,
) -> tuple[float, float, float]:
    """Outcome frequencies of an infinitely repeated stage game.

    ``closed_form`` sums the geometric series over rounds in which nobody
    stopped; ``simulate`` plays ``trials`` independent games round by round.
    Simulation draws one substream per chunk of trials so the result depends
    only on ``(seed, trials)``.
    """
    if p.a_i == 0 and p.a_j == 0:
        raise DomainError("both stage probabilities are zero; the game never ends")
    a, b = p.a_i, p.a_j
    if mode == "closed_form":
        return repeated_stage_closed_form(a, b)
    if mode != "simulate":
        raise ValueError(f"unknown mode {mode!r}")
    if trials < 1:
        raise DomainError("simulate mode needs trials >= 1")
    counts = np.zeros(3, dtype=np.int64)
    n_chunks = -(-trials // chunk)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    for c, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        n = min(chunk, trials - c * chunk)
        live = np.ones(n, dtype=bool)
        i_stop = np.zeros(n, dtype=bool)
        j_stop = np.zeros(n, dtype=bool)
        while live.any():
            m = int(live.sum())
            si = rng.random(m) < a
            sj = rng.random(m) < b
            idx = np.flatnonzero(live)
            ended = si | sj
            i_stop[idx[ended]] = si[ended]
            j_stop[idx[ended]] = sj[ended]
            live[idx[ended]] = False
        counts[0] += np.count_nonzero(i_stop & ~j_stop)
        counts[1] += np.count_nonzero(j_stop & ~i_stop)
        counts[2] += np.count_nonzero(i_stop & j_stop)
    freq = counts / trials
    return float(freq[0]), float(freq[1]), float(freq[2])


def _default_window(times: np.ndarray, tau_hat: int) -> float:
    k_far = min(tau_hat + DEFAULT_WINDOW_STEPS, len(times) - 1)
    if k_far <= tau_hat:
        return 0.0
    return float(times[k_far] - times[tau_hat])


def right_limit_estimate(
    alpha_i,
    alpha_j,
    tau_hat: int,
    times=None,
    window0: float | None = None,
    shrink: float = DEFAULT_SHRINK,
    tol: float = DEFAULT_LIMIT_TOL,
) -> RightLimitEstimate:
    """Estimate liminf/limsup of ``mu_L(alpha_i(t), alpha_j(t))`` as ``t`` decreases to ``tau_hat``.

    Only finite nodes after ``tau_hat`` with ``alpha_i + alpha_j > 0`` count.
    Windows ``(t_tau, t_tau + window0 * shrink**k]`` are swept until they hold
    no admissible node.  Within nested windows the minimum is nondecreasing
    and the maximum nonincreasing.  Windows holding the same nodes are
    merged.  The estimate is taken at the end of the first run of
    consecutive windows whose extrema move by at most ``tol``
    (``converged=True``), or at the smallest non-empty window when no run
    stabilises before the grid resolution is reached (``converged=False``).
    """
    a_i = np.asarray(alpha_i, dtype=float)
    a_j = np.asarray(alpha_j, dtype=float)
    if a_i.shape != a_j.shape or a_i.ndim != 1:
        raise ShapeError("alpha paths must be 1-D arrays of equal length")
    n_finite = a_i.shape[0] if times is None else len(times)
    if times is None:
        times = np.arange(n_finite, dtype=float)
    times = np.asarray(times, dtype=float)
    if a_i.shape[0] not in (n_finite, n_finite + 1):
        raise ShapeError("alpha length must match the grid (optionally plus the infinity slot)")
    if not 0.0 < shrink < 1.0:
        raise DomainError("shrink must lie in (0, 1)")
    if window0 is None:
        window0 = _default_window(times, tau_hat)
    if tau_hat + 1 < n_finite and window0 < times[tau_hat + 1] - times[tau_hat]:
        raise DomainError("window0 must cover the first grid step after tau_hat")

    ks = np.arange(tau_hat + 1, n_finite)
    ai, aj = a_i[ks], a_j[ks]
    ok = (ai + aj) > 0
    ks, ai, aj = ks[ok], ai[ok], aj[ok]
    if ks.size == 0:
        raise EmptyLimitError(f"no node after {tau_hat} with positive extension")
    vals = ai * (1.0 - aj) / (ai + aj - ai * aj)
    offsets = times[ks] - times[tau_hat]

    records: list[tuple[float, float]] = []
    last_count = -1
    w = float(window0)
    while w > 0:
        inside = offsets <= w
        count = int(inside.sum())
        if count == 0:
            break
        if count != last_count:
            v = vals[inside]
            records.append((float(v.min()), float(v.max())))
            last_count = count
        w *= shrink
    if not records:
        raise EmptyLimitError(f"no admissible node within window0={window0} of tau_hat")

    est = records[-1]
    stable = False
    for k in range(1, len(records)):
        lo_prev, hi_prev = records[k - 1]
        lo, hi = records[k]
        if abs(lo - lo_prev) <= tol and abs(hi - hi_prev) <= tol:
            stable = True
            est = records[k]
        elif stable:
            break
    return RightLimitEstimate(est[0], est[1], stable, len(records))


def first_active_index(G, alpha, theta, onset=None):
    """First node ``k >= theta`` where the extension becomes active, else ``K``.

    A node is active if ``alpha(k) > 0``, or if ``G(k) == 1``, ``alpha(k) == 0``
    and ``alpha(k+1) > 0`` at the next finite node.  The second clause places
    the infimum of ``{alpha > 0}`` at ``k`` when the extension switches on
    immediately after a node where the distribution is already exhausted.
    Works on 1-D paths or ``(n, K+1)`` batches.  An explicit boolean
    ``onset`` mask replaces the second clause, for strategies whose
    extension jumps between nodes rather than switching on continuously.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    a = np.atleast_2d(np.asarray(alpha, dtype=float))
    n, width = a.shape
    K = width - 1
    pos = a[:, :K] > 0
    active = pos.copy()
    if onset is not None:
        active |= np.atleast_2d(np.asarray(onset, dtype=bool))[:, :K]
    elif K >= 2:
        active[:, :-1] |= ~pos[:, :-1] & (G[:, : K - 1] == 1.0) & pos[:, 1:]
    theta = np.broadcast_to(np.asarray(theta), (n,))
    if np.any(theta > 0):
        active &= np.arange(K)[None, :] >= theta[:, None]
    first = active.argmax(axis=1)
    return np.where(active[np.arange(n), first], first, K)


def _check_single(G_i, G_j, alpha_i, alpha_j):
    arrs = [np.asarray(x, dtype=float) for x in (G_i, G_j, alpha_i, alpha_j)]
    if any(x.ndim != 1 for x in arrs) or len({x.shape for x in arrs}) != 1:
        raise ShapeError("G and alpha paths must be 1-D arrays on one grid")
    bad = []
    for name, G, a in (("i", arrs[0], arrs[2]), ("j", arrs[1], arrs[3])):
        if np.any((G < 0) | (G > 1) | (a < 0) | (a > 1)):
            bad.append(f"player {name}: values outside [0, 1]")
        if np.any(np.diff(G) < 0):
            bad.append(f"player {name}: G decreases")
        if np.any((a > 0) & (G < 1)):
            bad.append(f"player {name}: alpha > 0 where G < 1")
    if bad:
        raise ValidationError("invalid strategy samples: " + "; ".join(bad), bad)
    return arrs


def resolve_outcome(
    G_i,
    G_j,
    alpha_i,
    alpha_j,
    theta: int,
    times=None,
    window0: float | None = None,
    shrink: float = DEFAULT_SHRINK,
    tol: float = DEFAULT_LIMIT_TOL,
    onset_i=None,
    onset_j=None,
) -> OutcomeDistribution:
    """Outcome probabilities at the first instant any extension is active, for one path.

    Inputs are ``K + 1``-long arrays (last entry the infinity slot, where
    ``G = alpha = 1`` is enforced).  ``times`` has the ``K`` finite node times.
    """
    G_i, G_j, alpha_i, alpha_j = _check_single(G_i, G_j, alpha_i, alpha_j)
    K = G_i.shape[0] - 1
    if times is not None and len(times) != K:
        raise ShapeError(f"times has {len(times)} nodes, paths have {K} finite nodes")
    G_i, G_j, alpha_i, alpha_j = (x.copy() for x in (G_i, G_j, alpha_i, alpha_j))
    for x in (G_i, G_j, alpha_i, alpha_j):
        x[K] = 1.0

    t_i = int(first_active_index(G_i, alpha_i, theta, onset_i)[0])
    t_j = int(first_active_index(G_j, alpha_j, theta, onset_j)[0])
    tau = min(t_i, t_j)
    gi_prev = G_i[tau - 1] if tau > 0 else 0.0
    gj_prev = G_j[tau - 1] if tau > 0 else 0.0
    mass = (1.0 - gi_prev) * (1.0 - gj_prev)
    ai, aj = alpha_i[tau], alpha_j[tau]
    dGi, dGj = G_i[tau] - gi_prev, G_j[tau] - gj_prev

    if tau < t_j:
        lam_i = (1.0 - gi_prev) * (1.0 - G_j[tau])
        lam_m = (1.0 - gi_prev) * ai * dGj
        lam_j = (1.0 - gi_prev) * (1.0 - ai) * dGj
        return OutcomeDistribution(tau, lam_i, lam_j, lam_m, mass, 1)
    if tau < t_i:
        lam_j = (1.0 - gj_prev) * (1.0 - G_i[tau])
        lam_m = (1.0 - gj_prev) * aj * dGi
        lam_i = (1.0 - gj_prev) * (1.0 - aj) * dGi
        return OutcomeDistribution(tau, lam_i, lam_j, lam_m, mass, 2)
    if max(ai, aj) == 1.0 or min(ai, aj) > 0.0:
        lam_i = mass * mu_L(ai, aj)
        lam_j = mass * mu_L(aj, ai)
        lam_m = mass * mu_M(ai, aj)
        return OutcomeDistribution(tau, lam_i, lam_j, lam_m, mass, 3 if tau < K else 0)

    ell_i, ell_j, conv = _case4_limits(alpha_i, alpha_j, tau, K, times, window0, shrink, tol)
    lam_i = mass * (1.0 - aj) * (ai + (1.0 - ai) * ell_i)
    lam_j = mass * (1.0 - ai) * (aj + (1.0 - aj) * ell_j)
    lam_m = mass - (lam_i + lam_j)
    return OutcomeDistribution(tau, lam_i, lam_j, lam_m, mass, 4, conv)


def _case4_limits(alpha_i, alpha_j, tau, K, times, window0, shrink, tol):
    """Symmetric liminf/limsup averages for both players' ``mu_L``."""
    a_i, a_j = alpha_i[:K], alpha_j[:K]
    try:
        ri = right_limit_estimate(a_i, a_j, tau, times, window0, shrink, tol)
        rj = right_limit_estimate(a_j, a_i, tau, times, window0, shrink, tol)
        return (
            0.5 * (ri.liminf_est + ri.limsup_est),
            0.5 * (rj.liminf_est + rj.limsup_est),
            ri.converged and rj.converged,
        )
    except EmptyLimitError:
        # degenerate discretisation: use the extensions one node later
        nxt = min(tau + 1, K)
        x, y = alpha_i[nxt], alpha_j[nxt]
        if nxt == K:
            x = y = 1.0
        return mu_L(x, y), mu_L(y, x), False


@dataclass
class OutcomeBatch:
    """Vectorised outcome masses for ``n`` paths (arrays of shape ``(n,)``)."""

    tau_hat: np.ndarray
    lambda_L: np.ndarray  # shape (2, n): leader mass of player 0 and player 1
    lambda_M: np.ndarray
    residual: np.ndarray
    case: np.ndarray


def resolve_outcomes(G1, G2, a1, a2, theta, times=None, onset1=None, onset2=None, active=None, **limit_kw) -> OutcomeBatch:
    """Batch version of :func:`resolve_outcome` for ``(n, K+1)`` arrays.

    Cases 1-3 are evaluated in closed form across all rows; rows that fall
    in the right-limit case are delegated to :func:`resolve_outcome`.
    Inputs must already satisfy the feasibility conditions.  ``active`` may
    pass precomputed activation indices of both players.
    """
    G1, G2, a1, a2 = (np.asarray(x, dtype=float) for x in (G1, G2, a1, a2))
    if not (G1.shape == G2.shape == a1.shape == a2.shape) or G1.ndim != 2:
        raise ShapeError("batch arrays must share shape (n, K+1)")
    n, width = G1.shape
    K = width - 1
    theta = np.broadcast_to(np.asarray(theta, dtype=np.int64), (n,))
    if active is None:
        t1 = first_active_index(G1, a1, theta, onset1)
        t2 = first_active_index(G2, a2, theta, onset2)
    else:
        t1, t2 = active
    tau = np.minimum(t1, t2)
    rows = np.arange(n)
    prev = np.maximum(tau - 1, 0)
    has_prev = tau > 0
    g1p = np.where(has_prev, G1[rows, prev], 0.0)
    g2p = np.where(has_prev, G2[rows, prev], 0.0)
    at_inf = tau == K
    g1 = np.where(at_inf, 1.0, G1[rows, tau])
    g2 = np.where(at_inf, 1.0, G2[rows, tau])
    x1 = np.where(at_inf, 1.0, a1[rows, tau])
    x2 = np.where(at_inf, 1.0, a2[rows, tau])
    d1, d2 = g1 - g1p, g2 - g2p
    mass = (1.0 - g1p) * (1.0 - g2p)

    lam1 = np.zeros(n)
    lam2 = np.zeros(n)
    lamm = np.zeros(n)
    case = np.zeros(n, dtype=np.int8)

    c1 = tau < t2
    lam1[c1] = ((1.0 - g1p) * (1.0 - g2))[c1]
    lamm[c1] = ((1.0 - g1p) * x1 * d2)[c1]
    lam2[c1] = ((1.0 - g1p) * (1.0 - x1) * d2)[c1]
    case[c1] = 1

    c2 = tau < t1
    lam2[c2] = ((1.0 - g2p) * (1.0 - g1))[c2]
    lamm[c2] = ((1.0 - g2p) * x2 * d1)[c2]
    lam1[c2] = ((1.0 - g2p) * (1.0 - x2) * d1)[c2]
    case[c2] = 2

    joint = ~(c1 | c2)
    c3 = joint & ((np.maximum(x1, x2) == 1.0) | (np.minimum(x1, x2) > 0.0))
    if c3.any():
        x, y = x1[c3], x2[c3]
        den = x + y - x * y
        lam1[c3] = mass[c3] * (x * (1.0 - y) / den)
        lam2[c3] = mass[c3] * (y * (1.0 - x) / den)
        lamm[c3] = mass[c3] * (x * y / den)
        case[c3] = np.where(at_inf[c3], 0, 3)

    c4 = joint & ~c3
    for r in np.flatnonzero(c4):
        od = resolve_outcome(
            G1[r], G2[r], a1[r], a2[r], int(theta[r]), times,
            onset_i=None if onset1 is None else onset1[r],
            onset_j=None if onset2 is None else onset2[r],
            **limit_kw,
        )
        lam1[r], lam2[r], lamm[r] = od.lambda_L_i, od.lambda_L_j, od.lambda_M
        case[r] = 4
    return OutcomeBatch(tau, np.stack([lam1, lam2]), lamm, mass, case)
