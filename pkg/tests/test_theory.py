from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imaxppo import theory as T
from imaxppo.envs import GridMiner
from imaxppo.game import UnsupportedOperationError, marginalized_transition_matrix
from imaxppo.imitation.tabular import occupancy

from conftest import random_policy


@pytest.fixture(scope="module")
def noisy():
    game = T.default_game()
    return game, marginalized_transition_matrix(game), game.initial_distribution()


def _inputs(gamma=0.5, q_max=1.0, n=4, eps=0.01):
    Q = np.zeros((1, 1, n))
    Q[0, 0, 0] = q_max
    pi = np.array([[1.0]])
    return T.BoundInputs(pi, pi, Q, gamma, eps, q_max, n, -math.log(n))


def test_phi_gamma_zero_q_zero_is_minus_log_n():
    # gamma = 0 leaves only -V(S0) = -ln N
    for N in (1, 2, 5):
        P = np.full((N, 2, N), 1.0 / N)
        mu0 = np.eye(N)[0]
        phi = T.phi_objective(np.zeros((N, 2, N)), np.full((N, 2), 0.5), P, mu0, 0.0)
        assert abs(phi.value + math.log(N)) < 1e-12
        assert phi.expected_q == 0.0


def test_phi_oracle_by_direct_sums(noisy):
    game, P, mu0 = noisy
    g = game.spec.gamma
    rng = np.random.default_rng(0)
    pi = random_policy(rng, P.shape[0], 3)
    Q = rng.normal(size=P.shape)
    phi = T.phi_objective(Q, pi, P, mu0, g)
    # independent oracle: occupancy by power series, V by explicit loops
    d = np.zeros(P.shape[0])
    term = mu0.copy()
    Ppi = np.einsum("sa,sat->st", pi, P)
    for t in range(2000):
        d += (1 - g) * g**t * term
        term = term @ Ppi
    V = np.array([sum(pi[s, a] * math.log(np.exp(Q[s, a]).sum()) for a in range(3)) for s in range(P.shape[0])])
    rho = d[:, None, None] * pi[:, :, None] * P
    oracle = np.sum(rho * (Q - g * V[None, None, :])) - (1 - g) * mu0 @ V
    assert abs(phi.value - oracle) < 1e-10
    assert abs(sum(phi.terms()) - phi.value) < 1e-10


def test_phi_identical_policies_identical_values(noisy):
    game, P, mu0 = noisy
    rng = np.random.default_rng(1)
    pi = random_policy(rng, P.shape[0], 3)
    Q = rng.normal(size=P.shape)
    a = T.phi_objective(Q, pi, P, mu0, 0.9).value
    b = T.phi_objective(Q, pi.copy(), P, mu0, 0.9).value
    assert a == b


def test_phi_rejects_non_enumerable():
    with pytest.raises(UnsupportedOperationError):
        T.phi_for_game(GridMiner(), np.zeros((1, 1, 1)), np.ones((1, 1)))


def test_kl_examples():
    p = np.array([[0.2, 0.8]])
    assert T.kl_per_state_max(p, p) == 0.0
    assert T.kl_per_state_max(np.array([[1.0, 0.0]]), np.array([[0.5, 0.5]])) == pytest.approx(1.0, abs=1e-15)
    assert T.kl_per_state_max(np.array([[0.5, 0.5]]), np.array([[1.0, 0.0]])) == math.inf


@pytest.mark.parametrize("delta", [1e-3, 1e-2, 3e-2])
def test_kl_small_symmetric_perturbation(delta):
    p = np.array([[0.5, 0.5]])
    q = np.array([[0.5 + delta, 0.5 - delta]])
    direct = 0.5 * math.log2(0.5 / (0.5 + delta)) + 0.5 * math.log2(0.5 / (0.5 - delta))
    assert T.kl_per_state_max(p, q) == pytest.approx(direct, rel=1e-9)
    assert T.kl_per_state_max(p, q) == pytest.approx(2 * delta**2 / math.log(2), rel=5 * delta**2 + 1e-6)


def test_bound_rhs_examples():
    assert T.bound_rhs(_inputs(eps=0.0)) == 0.0
    a, b = T.bound_coefficients(0.5)
    assert (a, b) == (6.5, 4.5)
    rhs = T.bound_rhs(_inputs())
    assert rhs == pytest.approx((6.5 + 4.5 * math.log(4)) * math.sqrt(0.02 * math.log(2)), rel=1e-14)
    assert rhs == pytest.approx(1.50, abs=0.01)
    # continuous form with the uniform-actor floor is the discrete form
    assert T.bound_rhs(_inputs(), "continuous") == pytest.approx(rhs, rel=1e-14)
    with pytest.raises(ValueError):
        T.bound_coefficients(1.0)
    with pytest.raises(ValueError):
        T.bound_rhs(_inputs(), "other")


@given(
    st.floats(0.0, 0.99),
    st.floats(0.0, 10.0),
    st.integers(2, 500),
    st.floats(1e-6, 1.0),
    st.floats(1.01, 3.0),
)
def test_bound_rhs_monotone(gamma, q_max, n, eps, factor):
    base = T.bound_rhs(_inputs(gamma, q_max, n, eps))
    assert T.bound_rhs(_inputs(gamma, q_max, n, eps * factor)) >= base
    assert T.bound_rhs(_inputs(gamma, q_max * factor + 0.1, n, eps)) >= base
    assert T.bound_rhs(_inputs(gamma, q_max, int(n * factor) + 1, eps)) >= base


def test_bound_inputs_validate_kl_cap():
    rng = np.random.default_rng(2)
    pi = random_policy(rng, 5, 3)
    pert, kl = T.tilted_pair(pi, rng, 1e-3)
    assert 0.9e-3 <= kl <= 1e-3
    T.BoundInputs.build(pi, pert, np.zeros((5, 3, 5)), 0.9, 1e-3)
    with pytest.raises(ValueError):
        T.BoundInputs.build(pi, pert, np.zeros((5, 3, 5)), 0.9, 1e-4)


def test_tilted_pair_zero_eps():
    pi = random_policy(np.random.default_rng(3), 4, 3)
    pert, kl = T.tilted_pair(pi, np.random.default_rng(0), 0.0)
    assert kl == 0.0 and np.array_equal(pert, pi)


def test_supremum_closed_form_matches_ascent(noisy):
    game, P, mu0 = noisy
    g = game.spec.gamma
    rng = np.random.default_rng(4)
    pi = random_policy(rng, P.shape[0], 3)
    closed = T.phi_supremum(pi, P, mu0, g)
    # Q = ln P (zeros clipped far down) nearly attains it
    Q = np.log(np.maximum(P, 1e-300))
    assert T.phi_objective(np.maximum(Q, -60.0), pi, P, mu0, g).value == pytest.approx(closed, abs=1e-9)
    ascent = T.phi_supremum_ascent(pi, P, mu0, g, rng, restarts=1, n_steps=2000)
    assert ascent <= closed + 1e-9
    assert closed - ascent < 2e-3


def test_zero_eps_trials_have_zero_lhs(noisy):
    reps = T.verify_perturbation_bound(n_trials=3, eps_grid=(0.0,), ascent_checks=0)
    for r in reps:
        if r.check_name.startswith("perturbation_bound"):
            assert r.violations == 0 and r.details["mean_lhs"] == [0.0]


def test_mutated_bound_is_caught():
    rep = T.mutation_selftest(n_trials=3)
    assert rep.passed and rep.details["mutant_violations"] > 0


def test_counterexample_serialization():
    reps = T.verify_perturbation_bound(n_trials=2, eps_grid=(1e-3,), rhs=lambda i, f: 0.0, ascent_checks=0)
    bad = [r for r in reps if r.check_name == "perturbation_bound_discrete"][0]
    assert bad.violations == 2 and bad.counterexamples
    blob = json.loads(json.dumps(bad.to_dict()))
    assert np.asarray(blob["counterexamples"][0]["policy"]).shape == (64, 3)


def test_report_schema():
    report = T.run_suite("telescoping")
    T.validate_report(json.loads(json.dumps(report)))
    with pytest.raises(ValueError):
        T.validate_report({"suite": "x", "kl_log_base": 2, "passed": True, "checks": [{"check_name": "c"}]})
    with pytest.raises(ValueError):
        T.run_suite("nope")


def test_monte_carlo_small(noisy):
    game, P, mu0 = noisy
    rng = np.random.default_rng(5)
    pi = random_policy(rng, P.shape[0], 3)
    Q = rng.normal(size=P.shape)
    exact = T.phi_objective(Q, pi, P, mu0, game.spec.gamma).value
    mean, se = T.monte_carlo_phi(game, Q, pi, 100_000, rng)
    assert abs(mean - exact) < 4 * se
    mean, se = T.simulate_phi(game, Q, pi, 3000, rng)
    assert abs(mean - exact) < 4 * se


def test_noisy_enemy_distribution():
    game = T.default_game()
    s = game.make_state(0, 5)
    dist = game.enemy_distribution(s)
    assert sum(p for _, p in dist) == pytest.approx(1.0)
    assert max(p for _, p in dist) == pytest.approx(0.7 + 0.1)
