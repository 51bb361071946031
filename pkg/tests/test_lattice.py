import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timing_games.errors import LatticeError, PreconditionError, ShapeError
from timing_games.grid import TimeGrid
from timing_games.lattice import (
    MarkovLattice,
    drift_classify,
    gbm_lattice,
    hitting_time,
    lattice_hitting_time,
    lattice_to_csv,
    snell_envelope,
)
from timing_games.models.gbm_entry import GbmEntryParams, follower_lattice, gbm_closed_forms
from timing_games.payoff import GameProcesses


def one_step(p_up=0.5):
    return MarkovLattice(TimeGrid(np.array([0.0, 1.0])), (np.array([1.0]), np.array([0.5, 2.0])), (np.array([p_up]),), (np.array([1 - p_up]),))


def test_zero_payoff_has_zero_value():
    lat = gbm_lattice(1.0, 0.0, 0.2, 1.0, 10)
    zeros = [np.zeros(n + 1) for n in range(11)]
    sol = snell_envelope(lat, zeros, np.zeros(11))
    assert all(np.all(v == 0) for v in sol.value)
    assert all(np.all(s) for s in sol.stop_region)


def test_single_period_examples():
    lat = one_step()
    sol = snell_envelope(lat, [np.array([3.0]), np.array([5.0, 5.0])], np.zeros(2))
    assert sol.root_value == 5.0 and not sol.stop_region[0][0]
    sol = snell_envelope(lat, [np.array([5.0]), np.array([3.0, 3.0])], np.zeros(2))
    assert sol.root_value == 5.0 and sol.stop_region[0][0]


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_snell_invariants(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(1, 30))
    lat = gbm_lattice(1.0, rng.uniform(-0.1, 0.1), rng.uniform(0.1, 0.5), 1.0, N)
    payoff = [rng.normal(size=n + 1) for n in range(N + 1)]
    term = rng.normal(size=N + 1)
    sol = snell_envelope(lat, payoff, term)
    for n in range(N):
        cont = lat.expect_next(n, sol.value[n + 1])
        assert np.all(sol.value[n] >= payoff[n]) and np.all(sol.value[n] >= cont - 1e-15)
        assert np.allclose(sol.value[n], np.maximum(payoff[n], cont), rtol=0, atol=0)
        assert np.array_equal(sol.stop_region[n], payoff[n] >= cont)


def test_follower_value_at_half_threshold():
    p = GbmEntryParams(x0=0.01)
    cf = gbm_closed_forms(p)
    x = cf.xF / 2
    assert cf.F_of_x(x) == pytest.approx(0.906, rel=1e-3)
    lat, pay, term, _ = follower_lattice(p, x, steps=2000, horizon=50.0)
    sol = snell_envelope(lat, pay, term)
    assert sol.root_value == pytest.approx(cf.F_of_x(x), rel=0.01)
    assert not sol.stop_region[0][0]


def test_follower_value_drift_on_lattice():
    # below xF the discounted follower value is a martingale; above it strictly loses value
    p = GbmEntryParams(x0=0.01)
    cf = gbm_closed_forms(p)
    dt = 1e-3
    for x, inside in ((0.3 * cf.xF, True), (0.9 * cf.xF, True), (1.5 * cf.xF, False), (3 * cf.xF, False)):
        lat = gbm_lattice(x, p.mu, p.sigma, dt, 1)
        nxt = math.exp(-p.r * dt) * lat.expect_next(0, cf.F_of_x(lat.states[1]))[0]
        rel = (nxt - cf.F_of_x(x)) / cf.F_of_x(x)
        if inside:
            assert abs(rel) < 1e-5
        else:
            # exact one-step loss exp(-r dt) I - I < 0 relative to F
            assert rel < -0.5 * p.r * p.I * dt / cf.F_of_x(x)


def test_hitting_time_examples():
    path = np.linspace(0.0, 1.0, 201)
    thr = path[137] - 1e-9
    assert hitting_time(path, lambda s: s >= thr) == 137
    assert hitting_time(path, lambda s: s >= 0.0) == 0
    assert hitting_time(path, lambda s: s > 2.0) == 201
    assert hitting_time(path, lambda s: s >= 0.0, start=50) == 50
    batch = np.stack([path, path[::-1]])
    assert list(hitting_time(batch, lambda s: s >= thr)) == [137, 0]
    with pytest.raises(ShapeError):
        hitting_time(path, np.ones(3, dtype=bool))


def test_lattice_hitting_time_matches_state_paths(rng):
    lat = gbm_lattice(1.0, 0.0, 0.3, 1.0, 40)
    region = [s >= 1.5 for s in lat.states]
    moves = rng.integers(0, 2, size=(300, 40))
    got = lattice_hitting_time(lat, region, moves)
    j = np.concatenate([np.zeros((300, 1), dtype=int), np.cumsum(moves, axis=1)], axis=1)
    states = np.stack([lat.states[n][j[:, n]] for n in range(41)], axis=1)
    assert np.array_equal(got, hitting_time(states, lambda s: s >= 1.5))


def test_lattice_errors():
    with pytest.raises(LatticeError):
        one_step(1.2)
    with pytest.raises(LatticeError):
        gbm_lattice(1.0, 5.0, 0.01, 10.0, 1)
    with pytest.raises(PreconditionError):
        gbm_lattice(-1.0, 0.0, 0.2, 1.0, 10)
    with pytest.raises(ShapeError):
        MarkovLattice(TimeGrid(np.array([0.0, 1.0])), (np.array([1.0]), np.array([1.0])), (np.array([0.5]),), (np.array([0.5]),))
    with pytest.raises(ShapeError):
        snell_envelope(one_step(), [np.array([1.0])], np.zeros(2))


def walk_sampler(drift):
    grid = TimeGrid(np.arange(11, dtype=float))

    def sample(n, rng):
        x = np.cumsum(np.concatenate([np.zeros((n, 1)), rng.normal(drift, 1.0, size=(n, 10))], axis=1), axis=1)
        X = np.concatenate([x, x[:, -1:]], axis=1)
        L = np.stack([X, X])
        return GameProcesses(grid, L, L, L)

    return sample


@pytest.mark.parametrize("drift,verdict", [(0.2, "submartingale"), (0.0, "martingale"), (-0.2, "supermartingale")])
def test_drift_classify_random_walks(drift, verdict):
    res = drift_classify(walk_sampler(drift), lambda b: b.L[0], [(0, 5), (5, 10)], 20_000, seed=7)
    assert [r.verdict for r in res] == [verdict, verdict]
    assert all(r.strict == (verdict != "martingale") for r in res)


def test_drift_classify_deterministic_leader_value():
    from timing_games.models.fixtures import DeterministicParams, build_deterministic

    m = build_deterministic(DeterministicParams())
    res = drift_classify(m.sample, lambda b: b.L[0], [(0, 10)], 100, seed=0)
    assert res[0].verdict == "submartingale"
    with pytest.raises(PreconditionError):
        drift_classify(m.sample, lambda b: b.L[0], [(3, 3)], 100, seed=0)
    with pytest.raises(PreconditionError):
        drift_classify(m.sample, lambda b: b.L[0], [(0, 1)], 10, seed=0)


def test_lattice_csv_rows():
    lat = one_step()
    sol = snell_envelope(lat, [np.array([3.0]), np.array([5.0, 5.0])], np.zeros(2))
    lines = lattice_to_csv(lat, sol).splitlines()
    assert lines[0] == "slice,time,state,value,stop"
    assert lines[1] == "0,0,1,5,0" and len(lines) == 4
