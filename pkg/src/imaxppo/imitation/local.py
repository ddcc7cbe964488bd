"""Function-approximation imitator over local observations.

Both nets read ``obs ++ onehot(ally action)`` and emit one value per joint
enemy atom (``n_atoms ** n_enemy_slots`` outputs). Infeasible atoms (absent
slots must vanish, moves must stay on the map) are masked out of every
softmax and log-sum-exp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..game import joint_mask
from ..fnapprox import Adam, ParamNet, clip_global_norm, make_net
from .buffer import EmptyBufferError

NEG = -1e30


@dataclass
class ImitatorNets:
    q_net: ParamNet
    pi_net: ParamNet
    n_actions: int

    @classmethod
    def build(cls, obs_width, n_actions, n_joint, rng, hidden=(64, 64), gain=0.01, layer_norm=False) -> ImitatorNets:
        sizes = [obs_width + n_actions, *hidden, n_joint]
        q = make_net(sizes, rng, gain=1.0, layer_norm=layer_norm)
        pi = make_net(sizes, rng, gain=gain, layer_norm=layer_norm)
        return cls(q, pi, n_actions)

    @property
    def n_joint(self) -> int:
        return self.q_net.out_width

    def inputs(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        obs = np.atleast_2d(obs)
        onehot = np.zeros((len(obs), self.n_actions))
        onehot[np.arange(len(obs)), np.asarray(actions, dtype=np.int64)] = 1.0
        return np.concatenate([obs, onehot], axis=1)

    def all_action_inputs(self, obs: np.ndarray) -> np.ndarray:
        """Rows ordered (sample 0, action 0..K-1), (sample 1, ...)."""
        obs = np.atleast_2d(obs)
        rep = np.repeat(obs, self.n_actions, axis=0)
        acts = np.tile(np.arange(self.n_actions), len(obs))
        return self.inputs(rep, acts)

    def policy(self, x: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return masked_softmax(self.pi_net.forward(x), mask)


def masked_softmax(z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    z = np.where(mask, z, NEG)
    e = np.exp(z - z.max(axis=-1, keepdims=True)) * mask
    return e / e.sum(axis=-1, keepdims=True)


def masked_lse(z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    z = np.where(mask, z, NEG)
    m = z.max(axis=-1)
    return m + np.log((np.exp(z - m[..., None]) * mask).sum(axis=-1))


def _soft_value(q, p, mask):
    """Sum over feasible atoms of p (q - ln p); zero-probability atoms contribute 0."""
    logp = np.log(np.where(p > 0, p, 1.0))
    return np.sum(np.where(mask & (p > 0), p * (q - logp), 0.0), axis=-1)


def _agent_weights(agents: np.ndarray) -> np.ndarray:
    """1 / (rows of the same agent): a weighted sum is then a sum of per-agent means."""
    _, inverse, counts = np.unique(agents, return_inverse=True, return_counts=True)
    return 1.0 / counts[inverse]


def horizon_weights(t, gamma: float, horizon: int | None) -> tuple[np.ndarray, float]:
    """Row weights and initial-state coefficient for the sampled objective.

    Without a horizon the rows are taken as draws from the normalized
    discounted occupancy: weight 1 and coefficient ``1 - gamma``. With a
    horizon H the rows are uniform over fixed-length episodes, so each row is
    reweighted by ``H gamma^t / Z`` and the starts by ``1 / Z`` with
    ``Z = sum_{t<H} gamma^t``. Then the Q and V mass on every observation
    balances exactly in expectation, and the estimate is the normalized
    truncated-horizon objective.
    """
    t = np.asarray(t)
    if horizon is None:
        return np.ones(t.shape), 1.0 - gamma
    Z = float(np.sum(gamma ** np.arange(horizon)))
    return horizon * gamma ** t.astype(np.float64) / Z, 1.0 / Z


def j_local(
    nets: ImitatorNets,
    batch: dict,
    starts: dict,
    gamma: float,
    with_grad: bool = True,
    horizon: int | None = None,
    value: str = "soft",
):
    """IL objective on local views and the gradient of its negation wrt the Q-net.

    J = sum_i E[w_t (Q(target|o,a) - gamma (1 - done) V(o'))] - c0 sum_i E[V(o0)]
    with V(x) = sum_a pi(a|x) sum_k Pi(k|x,a) (Q(k|x,a) - ln Pi(k|x,a)) and the
    ally action probabilities pi taken from the batch; ``w_t`` and ``c0`` come
    from ``horizon_weights`` (1 and ``1 - gamma`` when ``horizon`` is None).

    ``value="soft"`` takes Pi = softmax(Q), so V is the masked log-sum-exp and
    J is concave in the Q outputs. ``value="actor"`` plugs in the explicit
    actor instead; J is then linear in Q and the critic/actor pair forms a
    saddle problem that plain simultaneous gradient steps tend to orbit.
    Both give the same gradient formula with their own Pi.
    Returns ``(J, grads)`` where ``grads`` follow ``q_net.params()`` and
    minimize ``-J``.
    """
    B, B0 = len(batch["obs"]), len(starts["obs"])
    if B == 0 or B0 == 0:
        raise EmptyBufferError("j_local needs expert transitions and episode starts")
    K = nets.n_actions
    x1 = nets.inputs(batch["obs"], batch["action"])
    x2 = nets.all_action_inputs(batch["next_obs"])
    x3 = nets.all_action_inputs(starts["obs"])
    m2 = np.repeat(batch["next_mask"], K, axis=0)
    m3 = np.repeat(starts["mask"], K, axis=0)

    Q = nets.q_net.forward(np.concatenate([x1, x2, x3]))
    q1, q2, q3 = Q[:B], Q[B : B + B * K], Q[B + B * K :]
    if value == "actor":
        p2, p3 = nets.policy(x2, m2), nets.policy(x3, m3)
    elif value == "soft":
        p2, p3 = masked_softmax(q2, m2), masked_softmax(q3, m3)
    else:
        raise ValueError(f"value must be 'soft' or 'actor', got {value!r}")
    rw, c0 = horizon_weights(batch["t"] if horizon is not None else np.zeros(B), gamma, horizon)
    w1 = _agent_weights(batch["agent"]) * rw
    w0 = _agent_weights(starts["agent"])
    cont = 1.0 - batch["done"].astype(np.float64)
    a2 = batch["next_probs"].reshape(-1)
    a3 = starts["probs"].reshape(-1)

    q_taken = q1[np.arange(B), batch["target"]]
    v2 = (_soft_value(q2, p2, m2) * a2).reshape(B, K).sum(axis=1)
    v3 = (_soft_value(q3, p3, m3) * a3).reshape(B0, K).sum(axis=1)
    J = float(np.sum(w1 * (q_taken - gamma * cont * v2)) - c0 * np.sum(w0 * v3))
    if not with_grad:
        return J, None

    g = np.zeros_like(Q)
    g[np.arange(B), batch["target"]] = -w1
    g[B : B + B * K] = (gamma * np.repeat(w1 * cont, K) * a2)[:, None] * np.where(m2, p2, 0.0)
    g[B + B * K :] = (c0 * np.repeat(w0, K) * a3)[:, None] * np.where(m3, p3, 0.0)
    grads, _ = nets.q_net.backward(g)
    return J, grads


def actor_objective(nets: ImitatorNets, x: np.ndarray, mask: np.ndarray, with_grad: bool = True):
    """Mean soft value E_Pi[Q - ln Pi] at (x) with Q fixed; grads minimize its negation.

    Returns ``(loss, grads, mean KL(Pi || Pi^Q))``. Maximizing the soft value
    over Pi is the same as minimizing KL(Pi || softmax(Q)).
    """
    q = nets.q_net.forward(x)
    z = nets.pi_net.forward(x)
    p = masked_softmax(z, mask)
    f = _soft_value(q, p, mask)
    kl = masked_lse(q, mask) - f
    loss = -float(np.mean(f))
    if not with_grad:
        return loss, None, float(np.mean(kl))
    logp = np.log(np.where(p > 0, p, 1.0))
    dz = np.where(mask, p * (q - logp - f[:, None]), 0.0)
    grads, _ = nets.pi_net.backward(-dz / len(x))
    return loss, grads, float(np.mean(kl))


def sac_actor_update(nets: ImitatorNets, opt: Adam, batch: dict, max_grad_norm: float | None = None) -> dict:
    """One actor step pulling Pi toward softmax(Q) on the batch's (o, a) pairs."""
    if len(batch["obs"]) == 0:
        raise EmptyBufferError("empty batch")
    x = nets.inputs(batch["obs"], batch["action"])
    loss, grads, kl = actor_objective(nets, x, batch["mask"])
    if not np.isfinite(loss):
        raise FloatingPointError("imitator actor loss is not finite")
    if max_grad_norm is not None:
        grads, _ = clip_global_norm(grads, max_grad_norm)
    opt.step(nets.pi_net.params(), grads)
    return {"actor_loss": loss, "kl": kl}


def anchor_penalty(nets: ImitatorNets, batch: dict, coef: float, with_grad: bool = True):
    """``coef * E[(mean feasible Q(.|o,a))^2]`` on the batch rows.

    The soft policy is invariant to adding a constant to a Q row, and the
    sampled objective is not exactly flat along that direction, so Adam
    drifts Q without bound. Pinning each row's mean removes the drift and
    leaves ``Pi^Q`` untouched.
    """
    x = nets.inputs(batch["obs"], batch["action"])
    mask = batch["mask"]
    q = nets.q_net.forward(x)
    n = mask.sum(axis=1)
    mean = np.where(mask, q, 0.0).sum(axis=1) / n
    loss = float(coef * np.mean(mean**2))
    if not with_grad:
        return loss, None
    g = np.where(mask, (2.0 * coef * mean / (n * len(x)))[:, None], 0.0)
    grads, _ = nets.q_net.backward(g)
    return loss, grads


def critic_update(
    nets: ImitatorNets,
    opt: Adam,
    batch: dict,
    starts: dict,
    gamma: float,
    max_grad_norm: float | None = None,
    anchor: float = 0.0,
    horizon: int | None = None,
    value: str = "soft",
) -> dict:
    J, grads = j_local(nets, batch, starts, gamma, horizon=horizon, value=value)
    if not np.isfinite(J):
        raise FloatingPointError("imitator objective is not finite")
    penalty = 0.0
    if anchor > 0:
        penalty, pg = anchor_penalty(nets, batch, anchor)
        grads = [a + b for a, b in zip(grads, pg)]
    if max_grad_norm is not None:
        grads, _ = clip_global_norm(grads, max_grad_norm)
    opt.step(nets.q_net.params(), grads)
    return {"il_loss": -J, "anchor": penalty}


def predict_joint_atoms(nets: ImitatorNets, obs, actions, mask, mode: str = "mode", rng: np.random.Generator | None = None) -> np.ndarray:
    """Joint atom per row: argmax (``mode``) or a draw from Pi (``sample``)."""
    p = nets.policy(nets.inputs(obs, actions), mask)
    if mode == "mode":
        return np.argmax(p, axis=1)
    if mode != "sample":
        raise ValueError(f"mode must be 'mode' or 'sample', got {mode!r}")
    if rng is None:
        raise ValueError("sampling needs an rng")
    c = np.cumsum(p, axis=1)
    c /= c[:, -1:]
    u = rng.random(len(p))[:, None]
    return (c <= u).sum(axis=1)


def predict_next_enemy_states(game, nets: ImitatorNets, observations, actions, mode="mode", rng=None):
    """Predicted next local states of the enemies each ally can see.

    ``observations`` is a list of ``Observation``. Returns ``(atoms, present,
    states)``: per-slot atoms ``(B, n_enemies)``, presence flags, and the
    predicted local-state rows (zeros where masked).
    """
    obs_vec = np.stack([game.encode_observation(o) for o in observations])
    mask = np.stack([joint_mask(game.slot_atom_mask(o)) for o in observations])
    joint = predict_joint_atoms(nets, obs_vec, actions, mask, mode, rng)
    atoms = game.split_joint_atom(joint)
    present = atoms != game.vanish_atom
    states = np.zeros((len(observations), game.spec.n_enemies, observations[0].enemy_states.shape[1]), dtype=np.int64)
    for b, o in enumerate(observations):
        for j in range(game.spec.n_enemies):
            if present[b, j]:
                states[b, j] = game.apply_atom(o.enemy_states[j], atoms[b, j])
    return atoms, present, states

