import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from timing_games.equilibrium import (
    build_preemption_alpha,
    construct_spe,
    default_deviation_class,
    equilibrium_payoff,
    indifference_alpha,
    preemption_alpha,
    preemption_region,
    time_rules,
    verify_equilibrium,
)
from timing_games.errors import ConfigurationError, ConsistencyError, DomainError
from timing_games.grid import TimeGrid
from timing_games.models.fixtures import DeterministicParams, build_deterministic
from timing_games.outcome import resolve_outcome
from timing_games.payoff import GameProcesses, batch_payoff
from timing_games.strategy import ExtendedStrategy, StoppingRule

pos = st.floats(0.01, 10.0)


def test_indifference_examples():
    assert indifference_alpha(2.0, 1.0, 0.0) == pytest.approx(0.5)
    assert indifference_alpha(1.0, 0.9, -1.0) == pytest.approx(0.05)
    got = indifference_alpha(np.array([2.0, 3.0]), np.array([1.0, 1.0]), np.array([0.0, 0.0]))
    assert np.allclose(got, [0.5, 2 / 3])
    with pytest.raises(DomainError):
        indifference_alpha(1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        indifference_alpha(2.0, 1.0, 2.0)


@given(pos, pos)
def test_indifference_with_zero_penalty_scale(x, f):
    # L = F + x, M = F - 1 gives X / (1 + X)
    assert indifference_alpha(f + x, f, f - 1.0) == pytest.approx(x / (1 + x), rel=1e-12)


@given(pos, st.floats(-10.0, 10.0), pos)
def test_indifference_identity(d, m_off, f):
    L, M = f + d, f + m_off
    if M >= L:
        return
    q = indifference_alpha(L, f, M)
    assert q > 0 and (q <= 1) == (M <= f)
    assert q * M + (1 - q) * L == pytest.approx(f, rel=1e-9, abs=1e-9)


def constant_game(L, F, M, K=3):
    grid = TimeGrid(np.arange(K, dtype=float))
    arr = lambda v: np.broadcast_to(np.append(np.full(K, v), 0.0), (1, K + 1))  # noqa: E731
    return GameProcesses(grid, *(np.stack([arr(x[0]), arr(x[1])]) for x in (L, F, M)))


@given(pos, pos, pos, pos, pos, pos)
def test_preemption_payoff_equals_follower_value(d1, d2, g1, g2, f1, f2):
    # each player's intensity keeps the other indifferent, so both receive F
    L, F, M = (f1 + d1, f2 + d2), (f1, f2), (f1 - g1, f2 - g2)
    gp = constant_game(L, F, M)
    K = gp.grid.K
    reg = preemption_region(gp.L[:, :, :K], gp.F[:, :, :K])
    a = preemption_alpha(gp.L[:, :, :K], gp.F[:, :, :K], gp.M[:, :, :K], reg)
    assert a[0, 0, 0] == pytest.approx(indifference_alpha(L[1], F[1], M[1]))
    G = np.ones((1, K + 1))
    s = [ExtendedStrategy(G, np.append(a[i], 1.0, axis=None)[None, :], 0) for i in (0, 1)]
    pay = batch_payoff(gp, *s)[:, 0]
    assert pay == pytest.approx([f1, f2], rel=1e-9)


@given(st.floats(0.001, 1.0))
def test_symmetric_simultaneous_mass(q):
    G = np.ones(4)
    a = np.append(np.full(3, q), 1.0)
    out = resolve_outcome(G, G, a, a, 0)
    assert out.lambda_M == pytest.approx(q / (2 - q), rel=1e-12)
    assert out.lambda_L_i == out.lambda_L_j == pytest.approx((1 - q) / (2 - q), rel=1e-12)


def test_build_preemption_alpha_boundary_and_interior():
    m = build_deterministic(DeterministicParams())
    gp = m.sample(1, None)
    kp = gp.grid.index_at(3.0)
    assert build_preemption_alpha(gp, kp) == (1.0, 0.0)
    k = gp.grid.index_at(4.0)
    L, F, M = gp.L[:, 0, k], gp.F[:, 0, k], gp.M[:, 0, k]
    got = build_preemption_alpha(gp, k)
    assert got == pytest.approx((indifference_alpha(L[1], F[1], M[1]), indifference_alpha(L[0], F[0], M[0])))
    with pytest.raises(ConsistencyError):
        build_preemption_alpha(gp, kp - 1)


def test_construct_spe_errors():
    m = build_deterministic(DeterministicParams())
    assert construct_spe(m, "submartingale_preemption").name == "submartingale_preemption"
    with pytest.raises(ConfigurationError):
        construct_spe(m, "gbm_entry")
    with pytest.raises(ConfigurationError):
        construct_spe(m, "no_such_family")


@pytest.mark.parametrize("rule", [StoppingRule("start"), StoppingRule("at_time", 1.0), StoppingRule("at_time", 3.0), StoppingRule("at_time", 5.0)])
def test_deterministic_fixture_verifies(rule):
    m = build_deterministic(DeterministicParams())
    fam = construct_spe(m, "submartingale_preemption")
    dev = default_deviation_class(time_rules(np.linspace(0, 8, 33)))
    rep = verify_equilibrium(m, fam, rule, dev, 1000, seed=0)
    assert rep.verdict, rep.worst()
    assert all(p.n_paths == 1 for p in rep.payoffs)
    comp = rep.comparators
    assert [p.mean for p in rep.payoffs] == pytest.approx(comp, abs=1e-12)
    if rule.name == "start":
        # stopping at time 0 forfeits the later first-mover advantage
        early = [g for g in rep.gaps if g.deviation == "stop_now"]
        assert all(g.gap < 0 for g in early)


def test_symmetric_fixture_half_payoff():
    m = build_deterministic(DeterministicParams(symmetric=True, refine_levels=50))
    fam = construct_spe(m, "submartingale_preemption")
    pays, comp = equilibrium_payoff(m, fam, StoppingRule("start"), 1, seed=0)
    assert [p.mean for p in pays] == pytest.approx(comp, abs=1e-9)


def test_report_json_round_trip():
    import json

    m = build_deterministic(DeterministicParams())
    fam = construct_spe(m, "submartingale_preemption")
    rep = verify_equilibrium(m, fam, StoppingRule("start"), default_deviation_class([]), 1, seed=0)
    d = json.loads(rep.to_json())
    assert d["verdict"] == "pass" and len(d["gaps"]) == 2 * len(rep.deviation_names)
