"""Exact tabular state-only soft Q machinery.

Arrays are indexed ``[S, A, S']`` where ``A`` is the joint ally action and
``S'`` plays the role of the enemies' "action". ``ally_policy`` is an
``(n_states, n_actions)`` table. Occupancy measures are normalized, i.e.
``rho = (1 - gamma) * sum_t gamma^t P(S_t, A_t, S_{t+1})``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def lse(Q: np.ndarray) -> np.ndarray:
    """Max-stabilized log-sum-exp over the last axis."""
    m = Q.max(axis=-1)
    return m + np.log(np.exp(Q - m[..., None]).sum(axis=-1))


def policy_from_q(Q: np.ndarray) -> np.ndarray:
    """Softmax over next states, stabilized by the row max."""
    z = np.exp(Q - Q.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def v_soft(Q: np.ndarray, ally_policy: np.ndarray) -> np.ndarray:
    """V(S) = sum_A pi(A|S) lse_{S'} Q[S, A, S'], for every S."""
    return np.einsum("sa,sa->s", ally_policy, lse(Q))


def v_policy(Q: np.ndarray, ally_policy: np.ndarray, Pi: np.ndarray) -> np.ndarray:
    """Explicit-policy value: sum_A pi(A|S) sum_S' Pi(S'|S,A) (Q - ln Pi).

    Terms with Pi = 0 contribute 0 (the 0 ln 0 convention).
    """
    logp = np.log(np.where(Pi > 0, Pi, 1.0))
    inner = np.sum(Pi * (np.where(Pi > 0, Q, 0.0) - logp), axis=-1)
    return np.einsum("sa,sa->s", ally_policy, inner)


def _value(Q, ally_policy, Pi):
    return v_soft(Q, ally_policy) if Pi is None else v_policy(Q, ally_policy, Pi)


def soft_bellman(Q, R, ally_policy, gamma, Pi=None) -> np.ndarray:
    """B Q = R + gamma V(S'); V uses Pi^Q when ``Pi`` is None."""
    return R + gamma * _value(Q, ally_policy, Pi)[None, None, :]


def inverse_soft_bellman(Q, ally_policy, gamma, Pi=None) -> np.ndarray:
    """T Q = Q - gamma V(S')."""
    return Q - gamma * _value(Q, ally_policy, Pi)[None, None, :]


def solve_fixed_point(R, ally_policy, gamma, Pi=None, tol=1e-12, max_sweeps=10_000) -> tuple[np.ndarray, int]:
    """Iterate B from Q = 0 until the sup-norm change drops below ``tol``."""
    Q = np.zeros_like(R, dtype=np.float64)
    for sweep in range(1, max_sweeps + 1):
        nxt = soft_bellman(Q, R, ally_policy, gamma, Pi)
        delta = np.max(np.abs(nxt - Q))
        Q = nxt
        if delta < tol:
            return Q, sweep
    raise RuntimeError(f"soft Bellman iteration did not converge in {max_sweeps} sweeps (last change {delta:.3e})")


# --- occupancy measures ---------------------------------------------------
def state_kernel(ally_policy: np.ndarray, P: np.ndarray) -> np.ndarray:
    return np.einsum("sa,sat->st", ally_policy, P)


def state_occupancy(ally_policy, P, mu0, gamma) -> np.ndarray:
    """d = (1 - gamma) mu0^T (I - gamma P_pi)^{-1}, by a linear solve."""
    n = len(mu0)
    M = np.eye(n) - gamma * state_kernel(ally_policy, P)
    return (1.0 - gamma) * np.linalg.solve(M.T, mu0)


def occupancy(ally_policy, P, mu0, gamma) -> np.ndarray:
    """rho[S, A, S'] = d(S) pi(A|S) P(S'|S,A)."""
    d = state_occupancy(ally_policy, P, mu0, gamma)
    return d[:, None, None] * ally_policy[:, :, None] * P


# --- objectives -----------------------------------------------------------
def j_compact(Q, ally_policy, rho_E, mu0, gamma, Pi=None) -> float:
    """E_rhoE[Q - gamma V(S')] - (1 - gamma) E_mu0[V(S0)].

    ``rho_E`` may be exact or an empirical measure built from expert samples
    (see ``ExpertBuffer.empirical``). V uses Pi^Q unless ``Pi`` is given.
    """
    V = _value(Q, ally_policy, Pi)
    first = np.sum(rho_E * (Q - gamma * V[None, None, :]))
    return float(first - (1.0 - gamma) * np.dot(mu0, V))


def j_compact_parts(Q, ally_policy, rho_E, mu0, gamma, Pi=None) -> dict:
    V = _value(Q, ally_policy, Pi)
    return {
        "expected_q": float(np.sum(rho_E * Q)),
        "discounted_next_value": float(-gamma * np.sum(rho_E.sum(axis=(0, 1)) * V)),
        "initial_value": float(-(1.0 - gamma) * np.dot(mu0, V)),
    }


def j_occupancy(Q, ally_policy, P_E, mu0, gamma, Pi=None) -> float:
    """Occupancy form: E_rhoE[T] - E_rhoPi[T] + E_rhoPi[ln Pi], all exact."""
    Pi = policy_from_q(Q) if Pi is None else Pi
    T = inverse_soft_bellman(Q, ally_policy, gamma, Pi)
    rho_E = occupancy(ally_policy, P_E, mu0, gamma)
    rho_Pi = occupancy(ally_policy, Pi, mu0, gamma)
    logp = np.log(np.where(Pi > 0, Pi, 1.0))
    return float(np.sum(rho_E * T) - np.sum(rho_Pi * T) + np.sum(rho_Pi * logp))


def l_occupancy(Pi, R, ally_policy, P_E, mu0, gamma) -> float:
    """Entropy-regularized IRL loss E_rhoE[R] - E_rhoPi[R] + E_rhoPi[ln Pi]."""
    rho_E = occupancy(ally_policy, P_E, mu0, gamma)
    rho_Pi = occupancy(ally_policy, Pi, mu0, gamma)
    logp = np.log(np.where(Pi > 0, Pi, 1.0))
    return float(np.sum(rho_E * R) - np.sum(rho_Pi * R) + np.sum(rho_Pi * logp))


def j_gradient(Q, ally_policy, rho_E, mu0, gamma) -> np.ndarray:
    """dJ(Pi^Q, Q)/dQ = rho_E - w(S) pi(A|S) Pi^Q, w = gamma * next-state mass + (1 - gamma) mu0."""
    w = gamma * rho_E.sum(axis=(0, 1)) + (1.0 - gamma) * mu0
    return rho_E - (w[:, None] * ally_policy)[:, :, None] * policy_from_q(Q)


# --- fitting --------------------------------------------------------------
@dataclass
class FitReport:
    Q: np.ndarray
    j_history: list[float] = field(default_factory=list)
    halvings: int = 0
    step_size: float = 0.0
    converged: bool = False


def iq_update_tabular(Q, ally_policy, rho_E, mu0, gamma, step_size, precondition=True) -> np.ndarray:
    """One ascent step on the concave J(Pi^Q, Q).

    With ``precondition`` each (S, A) block is scaled by 1 / (w(S) pi(A|S)),
    turning the step into ``step_size * (empirical conditional - Pi^Q)``;
    blocks with zero weight are left alone. Either way the direction is an
    ascent direction.
    """
    g = j_gradient(Q, ally_policy, rho_E, mu0, gamma)
    if precondition:
        w = gamma * rho_E.sum(axis=(0, 1)) + (1.0 - gamma) * mu0
        scale = (w[:, None] * ally_policy)[:, :, None]
        g = np.divide(g, scale, out=np.zeros_like(g), where=scale > 0)
    return Q + step_size * g


def fit_tabular(
    ally_policy,
    rho_E,
    mu0,
    gamma,
    step_size=1.0,
    n_steps=2000,
    tol=1e-7,
    Q0=None,
    precondition=True,
) -> FitReport:
    """Gradient ascent with step halving when J drops two steps in a row.

    Converged when Pi^Q moves less than ``tol`` (sup norm) in one step. J
    itself may keep creeping up along the shift direction of each (S, A)
    block when sampled action frequencies differ from ``ally_policy``; that
    direction leaves Pi^Q unchanged.
    """
    Q = np.zeros_like(rho_E) if Q0 is None else np.array(Q0, dtype=np.float64)
    report = FitReport(Q=Q, step_size=step_size)
    J = j_compact(Q, ally_policy, rho_E, mu0, gamma)
    report.j_history.append(J)
    drops = 0
    for _ in range(n_steps):
        nxt = iq_update_tabular(Q, ally_policy, rho_E, mu0, gamma, report.step_size, precondition)
        J_new = j_compact(nxt, ally_policy, rho_E, mu0, gamma)
        drops = drops + 1 if J_new < J - 1e-12 else 0
        if drops >= 2:
            report.step_size *= 0.5
            report.halvings += 1
            drops = 0
        moved = np.max(np.abs(policy_from_q(nxt) - policy_from_q(Q)))
        Q, J = nxt, J_new
        report.j_history.append(J)
        if moved < tol:
            report.converged = True
            break
    report.Q = Q
    return report


def weighted_tv(Pi, P, weights) -> float:
    """Average total-variation distance over (S, A), weighted by ``weights[S, A]``."""
    tv = 0.5 * np.abs(Pi - P).sum(axis=-1)
    return float(np.sum(weights * tv) / np.sum(weights))
