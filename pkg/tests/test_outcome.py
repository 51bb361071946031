import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timing_games.errors import DomainError, EmptyLimitError, ShapeError, ValidationError
from timing_games.outcome import (
    StageProbabilities,
    first_active_index,
    geometric_sum,
    mu_L,
    mu_M,
    repeated_stage_closed_form,
    repeated_stage_oracle,
    resolve_outcome,
    resolve_outcomes,
    right_limit_estimate,
    stage_outcome_measures,
)

prob = st.floats(0.0, 1.0, allow_nan=False)


def brute_series(a, b, rounds=20000):
    """Round-by-round summation with math.fsum, independent of the squaring product."""
    q = (1 - a) * (1 - b)
    terms = []
    w = 1.0
    for _ in range(rounds):
        terms.append(w)
        w *= q
        if w < 1e-300:
            break
    s = math.fsum(terms)
    return a * (1 - b) * s, b * (1 - a) * s, a * b * s


@pytest.mark.parametrize(
    "a,b,expected",
    [((1.0), 0.0, (1.0, 0.0, 0.0)), (1.0, 0.5, (0.5, 0.0, 0.5)), (0.5, 0.5, (1 / 3, 1 / 3, 1 / 3))],
)
def test_stage_measure_examples(a, b, expected):
    got = stage_outcome_measures(StageProbabilities(a, b))
    assert np.allclose(got, expected, atol=1e-15, rtol=0)


def test_origin_is_a_domain_error():
    with pytest.raises(DomainError):
        mu_L(0.0, 0.0)
    with pytest.raises(DomainError):
        repeated_stage_oracle(StageProbabilities(0.0, 0.0))
    with pytest.raises(DomainError):
        StageProbabilities(1.2, 0.1)


def test_closed_form_example_against_brute_sum():
    got = repeated_stage_oracle(StageProbabilities(0.3, 0.5))
    assert np.allclose(got, (0.15 / 0.65, 0.35 / 0.65, 0.15 / 0.65), atol=1e-15)
    assert np.allclose(got, brute_series(0.3, 0.5), atol=1e-15)


@given(prob, prob)
def test_measures_partition_and_swap(x, y):
    if x == 0 and y == 0:
        return
    li, lj, m = stage_outcome_measures(StageProbabilities(x, y))
    assert abs(li + lj + m - 1.0) < 1e-12
    assert mu_L(y, x) == lj
    assert mu_M(y, x) == pytest.approx(m, abs=1e-15)


@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_series_matches_brute_force(a, b):
    assert np.allclose(repeated_stage_closed_form(a, b), brute_series(a, b), atol=1e-12)


def test_geometric_sum_edges():
    assert geometric_sum(0.0) == 1.0
    assert geometric_sum(0.5) == pytest.approx(2.0, abs=1e-15)
    with pytest.raises(DomainError):
        geometric_sum(1.0)


def test_simulation_is_seeded():
    p = StageProbabilities(0.3, 0.5)
    a = repeated_stage_oracle(p, "simulate", 20000, seed=5)
    b = repeated_stage_oracle(p, "simulate", 20000, seed=5)
    assert a == b
    assert sum(a) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        repeated_stage_oracle(p, "simulate", 0, seed=1)


# ---------------------------------------------------------------- resolve_outcome


def test_case1_example():
    # G_j(tau) = 0.3 with no jump at tau: lambda_L,j is 0, not 0.3
    G_i = np.array([0.0, 1.0, 1.0, 1.0])
    a_i = np.array([0.0, 1.0, 1.0, 1.0])
    G_j = np.array([0.3, 0.3, 0.3, 1.0])
    a_j = np.array([0.0, 0.0, 0.0, 1.0])
    out = resolve_outcome(G_i, G_j, a_i, a_j, 0)
    assert out.case == 1 and out.tau_hat == 1
    assert (out.lambda_L_i, out.lambda_L_j, out.lambda_M) == pytest.approx((0.7, 0.0, 0.0), abs=1e-15)
    assert out.residual == pytest.approx(0.7)


def test_case3_example():
    one = np.ones(3)
    half = np.array([0.5, 0.5, 1.0])
    out = resolve_outcome(one, one, one, half, 0)
    assert out.case == 3
    assert (out.lambda_L_i, out.lambda_L_j, out.lambda_M) == pytest.approx((0.5, 0.0, 0.5), abs=1e-15)


def linear_alpha_fixture(slope_i, slope_j, n=400):
    """Joint activation at node 0 with alphas vanishing linearly on a geometric grid."""
    s = np.concatenate([[0.0], np.geomspace(1e-9, 0.4, n - 1)])
    G = np.ones(n + 1)
    a_i = np.append(slope_i * s, 1.0)
    a_j = np.append(slope_j * s, 1.0)
    return G, a_i, a_j, s


def test_case4_linear_example():
    G, a_i, a_j, s = linear_alpha_fixture(1.0, 2.0)
    out = resolve_outcome(G, G, a_i, a_j, 0, s)
    assert out.case == 4
    assert out.lambda_L_i == pytest.approx(1 / 3, abs=1e-6)
    assert out.lambda_L_j == pytest.approx(2 / 3, abs=1e-6)
    assert out.lambda_M == pytest.approx(0.0, abs=1e-6)


def test_right_limit_oscillating_example():
    s = np.concatenate([[0.0], np.geomspace(1e-6, 1e-1, 200_000)])
    a_i = s.copy()
    a_j = s * (2.0 + np.sin(1.0 / np.where(s > 0, s, 1.0)))
    est = right_limit_estimate(a_i, a_j, 0, s)
    assert est.liminf_est == pytest.approx(0.25, abs=2e-3)
    assert est.limsup_est == pytest.approx(0.5, abs=2e-3)


def test_right_limit_constant_and_linear():
    t = np.arange(100.0)
    c = np.full(100, 0.4)
    est = right_limit_estimate(c, c, 0, t)
    assert est.liminf_est == est.limsup_est == mu_L(0.4, 0.4)
    assert est.converged
    _, a_i, a_j, s = linear_alpha_fixture(1.0, 2.0)
    est = right_limit_estimate(a_i[:-1], a_j[:-1], 0, s)
    assert est.liminf_est == pytest.approx(1 / 3, abs=1e-6)
    assert est.limsup_est == pytest.approx(1 / 3, abs=1e-6)


def test_right_limit_empty_window():
    z = np.zeros(10)
    with pytest.raises(EmptyLimitError):
        right_limit_estimate(z, z, 0)


def test_input_errors():
    with pytest.raises(ShapeError):
        resolve_outcome(np.ones(3), np.ones(4), np.ones(3), np.ones(3), 0)
    bad = np.array([0.0, 0.5, 0.4, 1.0])
    with pytest.raises(ValidationError):
        resolve_outcome(bad, np.ones(4), np.zeros(4), np.ones(4), 0)


@st.composite
def strategy_pair(draw, K=12):
    """Valid (G, alpha) pairs: nondecreasing G with alpha positive only where G = 1."""

    def one():
        incs = draw(st.lists(st.floats(0.0, 1.0), min_size=K, max_size=K))
        G = np.minimum(np.cumsum(np.array(incs) * draw(st.floats(0.0, 0.5))), 1.0)
        hit = draw(st.integers(0, K))
        if hit < K:
            G[hit:] = 1.0
        alpha = np.where(G == 1.0, np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=K, max_size=K))), 0.0)
        return np.append(G, 1.0), np.append(alpha, 1.0)

    G_i, a_i = one()
    G_j, a_j = one()
    return G_i, G_j, a_i, a_j


@settings(max_examples=200, deadline=None)
@given(strategy_pair())
def test_mass_identity_and_swap(pair):
    G_i, G_j, a_i, a_j = pair
    out = resolve_outcome(G_i, G_j, a_i, a_j, 0)
    gi = G_i[out.tau_hat - 1] if out.tau_hat > 0 else 0.0
    gj = G_j[out.tau_hat - 1] if out.tau_hat > 0 else 0.0
    assert abs(out.lambda_L_i + out.lambda_L_j + out.lambda_M - (1 - gi) * (1 - gj)) < 1e-12
    assert min(out.lambda_L_i, out.lambda_L_j, out.lambda_M) >= -1e-15
    sw = resolve_outcome(G_j, G_i, a_j, a_i, 0)
    assert (sw.lambda_L_i, sw.lambda_L_j, sw.lambda_M) == (out.lambda_L_j, out.lambda_L_i, out.lambda_M)


@settings(max_examples=100, deadline=None)
@given(st.lists(strategy_pair(), min_size=1, max_size=6))
def test_batch_matches_scalar(pairs):
    G1, G2, a1, a2 = (np.stack(x) for x in zip(*pairs))
    theta = np.zeros(len(pairs), dtype=np.int64)
    ob = resolve_outcomes(G1, G2, a1, a2, theta)
    for k, (gi, gj, ai, aj) in enumerate(pairs):
        one = resolve_outcome(gi, gj, ai, aj, 0)
        assert ob.tau_hat[k] == one.tau_hat
        assert ob.case[k] == one.case
        assert ob.lambda_L[0, k] == pytest.approx(one.lambda_L_i, abs=1e-15)
        assert ob.lambda_L[1, k] == pytest.approx(one.lambda_L_j, abs=1e-15)
        assert ob.lambda_M[k] == pytest.approx(one.lambda_M, abs=1e-15)


def test_first_active_index_onset_rules():
    G = np.array([[0.0, 1.0, 1.0, 1.0, 1.0]])
    a = np.array([[0.0, 0.0, 0.3, 0.3, 1.0]])
    # G reaches 1 at node 1 with alpha positive right after: active at node 1
    assert first_active_index(G, a, np.array([0]))[0] == 1
    off = np.zeros_like(G, dtype=bool)
    assert first_active_index(G, a, np.array([0]), off)[0] == 2
    assert first_active_index(G, a, np.array([3]))[0] == 3
