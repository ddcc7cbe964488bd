from __future__ import annotations

import numpy as np
import pytest
from conftest import random_policy
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from imaxppo.imitation import (
    EmptyBufferError,
    collect_tabular_expert,
    empirical_measures,
    fit_tabular,
    inverse_soft_bellman,
    iq_update_tabular,
    j_compact,
    j_occupancy,
    l_occupancy,
    occupancy,
    policy_from_q,
    soft_bellman,
    solve_fixed_point,
    tabular_buffer,
    v_policy,
    v_soft,
    weighted_tv,
)


def test_v_soft_equal_logits():
    rng = np.random.default_rng(0)
    for N in (1, 3, 64):
        Q = np.full((5, 3, N), 2.5)
        pi = random_policy(rng, 5, 3)
        assert np.max(np.abs(v_soft(Q, pi) - (2.5 + np.log(N)))) < 1e-12


def test_v_soft_deterministic_policy():
    rng = np.random.default_rng(1)
    Q = rng.normal(size=(4, 3, 6))
    pi = np.zeros((4, 3))
    pi[:, 1] = 1.0
    assert np.allclose(v_soft(Q, pi), np.log(np.exp(Q[:, 1]).sum(axis=1)), atol=1e-12)


def test_v_soft_matches_expectation_form(chain):
    game, P, mu0 = chain
    rng = np.random.default_rng(2)
    Q = rng.normal(scale=3, size=P.shape)
    pi = random_policy(rng, P.shape[0], 3)
    assert np.max(np.abs(v_soft(Q, pi) - v_policy(Q, pi, policy_from_q(Q)))) < 1e-10


def test_v_soft_no_overflow():
    Q = np.array([[[1000.0, 1000.0]]])
    assert abs(v_soft(Q, np.ones((1, 1)))[0] - (1000 + np.log(2))) < 1e-9


def test_soft_bellman_examples():
    rng = np.random.default_rng(3)
    Q = rng.normal(size=(4, 2, 4))
    R = rng.normal(size=Q.shape)
    pi = random_policy(rng, 4, 2)
    assert np.array_equal(soft_bellman(Q, R, pi, 0.0), R)
    c, N = 1.7, 4
    out = soft_bellman(np.full((4, 2, N), c), np.zeros((4, 2, N)), pi, 0.5)
    assert np.allclose(out, 0.5 * (c + np.log(N)), atol=1e-12)


def test_inverse_soft_bellman_examples():
    rng = np.random.default_rng(4)
    Q = rng.normal(size=(4, 2, 4))
    pi = random_policy(rng, 4, 2)
    assert np.array_equal(inverse_soft_bellman(Q, pi, 0.0), Q)
    c, N, g = -0.3, 4, 0.9
    T = inverse_soft_bellman(np.full((4, 2, N), c), pi, g)
    assert np.allclose(T, c - g * (c + np.log(N)), atol=1e-12)


def test_fixed_point_and_recovery(chain):
    game, P, mu0 = chain
    rng = np.random.default_rng(5)
    R = rng.normal(size=P.shape)
    pi = random_policy(rng, P.shape[0], 3)
    Q, sweeps = solve_fixed_point(R, pi, game.spec.gamma)
    assert np.max(np.abs(soft_bellman(Q, R, pi, game.spec.gamma) - Q)) < 1e-10
    assert np.max(np.abs(inverse_soft_bellman(Q, pi, game.spec.gamma) - R)) < 1e-9


def test_fixed_point_gamma_zero():
    R = np.random.default_rng(6).normal(size=(3, 2, 3))
    Q, sweeps = solve_fixed_point(R, np.full((3, 2), 0.5), 0.0)
    assert sweeps <= 2 and np.array_equal(Q, R)


def test_policy_from_q_examples():
    assert np.allclose(policy_from_q(np.full((2, 2, 5), 3.0)), 0.2)
    p = policy_from_q(np.log(np.array([1.0, 2.0, 3.0])))
    assert np.allclose(p, [1 / 6, 1 / 3, 1 / 2], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 2, 5), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_policy_from_q_valid_and_shift_invariant(Q, c):
    p = policy_from_q(Q)
    assert np.all(p >= 0) and np.allclose(p.sum(axis=-1), 1, atol=1e-9)
    assert np.allclose(policy_from_q(Q + c), p, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 0.99))
def test_contraction(seed, gamma):
    rng = np.random.default_rng(seed)
    pi = random_policy(rng, 6, 3)
    R = rng.normal(size=(6, 3, 6))
    Q1, Q2 = rng.normal(scale=5, size=(2, 6, 3, 6))
    lhs = np.max(np.abs(soft_bellman(Q1, R, pi, gamma) - soft_bellman(Q2, R, pi, gamma)))
    assert lhs <= gamma * np.max(np.abs(Q1 - Q2)) + 1e-9


def test_telescoping_identity(chain):
    game, P, mu0 = chain
    g = game.spec.gamma
    rng = np.random.default_rng(7)
    for _ in range(10):
        Q = rng.normal(scale=2, size=P.shape)
        pi = random_policy(rng, P.shape[0], 3)
        rho = occupancy(pi, P, mu0, g)
        assert abs(j_compact(Q, pi, rho, mu0, g) - j_occupancy(Q, pi, P, mu0, g)) < 1e-6
        # any explicit policy, not only Pi^Q
        Pi = rng.dirichlet(np.ones(P.shape[2]), size=P.shape[:2])
        assert abs(j_compact(Q, pi, rho, mu0, g, Pi) - j_occupancy(Q, pi, P, mu0, g, Pi)) < 1e-6


def test_j_compact_zero_q_is_minus_log_n():
    # gamma = 0, Q = 0, N next states: first term 0, initial term -ln N
    N = 5
    rho = np.zeros((N, 1, N))
    rho[0, 0, 2] = 1.0
    mu0 = np.eye(N)[0]
    assert abs(j_compact(np.zeros((N, 1, N)), np.ones((N, 1)), rho, mu0, 0.0) + np.log(N)) < 1e-12


def test_j_compact_zero_q_any_gamma(chain):
    game, P, mu0 = chain
    pi = np.full((P.shape[0], 3), 1 / 3)
    rho = occupancy(pi, P, mu0, game.spec.gamma)
    Q = np.zeros(P.shape)
    expected = j_occupancy(Q, pi, P, mu0, game.spec.gamma)
    assert abs(j_compact(Q, pi, rho, mu0, game.spec.gamma) - expected) < 1e-9
    assert abs(expected + np.log(P.shape[2])) < 1e-9


def test_reward_equivalence(chain):
    game, P, mu0 = chain
    g = game.spec.gamma
    rng = np.random.default_rng(8)
    pi = random_policy(rng, P.shape[0], 3)
    Pi = rng.dirichlet(np.ones(P.shape[2]), size=P.shape[:2])
    R = rng.normal(size=P.shape)
    Qs, _ = solve_fixed_point(R, pi, g, Pi)
    rho = occupancy(pi, P, mu0, g)
    assert abs(l_occupancy(Pi, R, pi, P, mu0, g) - j_compact(Qs, pi, rho, mu0, g, Pi)) < 1e-6
    assert np.max(np.abs(inverse_soft_bellman(Qs, pi, g, Pi) - R)) < 1e-8


def test_concavity(chain):
    game, P, mu0 = chain
    g = game.spec.gamma
    rng = np.random.default_rng(9)
    pi = random_policy(rng, P.shape[0], 3)
    rho = occupancy(pi, P, mu0, g)
    for _ in range(10):
        Q1, Q2 = rng.normal(scale=3, size=(2, *P.shape))
        j1, j2 = j_compact(Q1, pi, rho, mu0, g), j_compact(Q2, pi, rho, mu0, g)
        for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
            mid = j_compact(lam * Q1 + (1 - lam) * Q2, pi, rho, mu0, g)
            assert mid >= lam * j1 + (1 - lam) * j2 - 1e-9


def test_update_stationary_when_expert_matches(chain):
    game, P, mu0 = chain
    g = game.spec.gamma
    rng = np.random.default_rng(10)
    pi = random_policy(rng, P.shape[0], 3)
    Q = rng.normal(size=P.shape)
    rho = occupancy(pi, policy_from_q(Q), mu0, g)
    nxt = iq_update_tabular(Q, pi, rho, mu0, g, 1e-3, precondition=False)
    assert np.max(np.abs(nxt - Q)) < 1e-12


def test_update_monotone_small_step(chain):
    game, P, mu0 = chain
    g = game.spec.gamma
    rng = np.random.default_rng(11)
    pi = random_policy(rng, P.shape[0], 3)
    rho = occupancy(pi, P, mu0, g)
    Q = rng.normal(size=P.shape)
    for precondition in (False, True):
        Qt = Q.copy()
        for _ in range(20):
            nxt = iq_update_tabular(Qt, pi, rho, mu0, g, 1e-3, precondition)
            assert j_compact(nxt, pi, rho, mu0, g) >= j_compact(Qt, pi, rho, mu0, g) - 1e-12
            Qt = nxt


def test_fit_halves_on_divergence(chain_uniform):
    game, P, mu0 = chain_uniform
    g = game.spec.gamma
    pi = np.full((P.shape[0], 3), 1 / 3)
    rho = occupancy(pi, P, mu0, g)
    rep = fit_tabular(pi, rho, mu0, g, step_size=1e4, n_steps=60, precondition=False)
    assert rep.halvings >= 1 and rep.step_size < 1e4


def test_empty_buffer_rejected():
    with pytest.raises(EmptyBufferError):
        empirical_measures(tabular_buffer(10), 4, 2)


def test_tabular_imitator_fidelity(chain):
    game, P, mu0 = chain
    g = game.spec.gamma
    pi = np.full((P.shape[0], 3), 1 / 3)
    buf = collect_tabular_expert(game, pi, 100_000, np.random.default_rng(12))
    rho, mu_hat = empirical_measures(buf, P.shape[0], 3)
    rep = fit_tabular(pi, rho, mu_hat, g, n_steps=1000)
    weights = occupancy(pi, P, mu0, g).sum(axis=-1)
    assert weighted_tv(policy_from_q(rep.Q), P, weights) < 0.05
