"""PPO pieces: GAE, clipped surrogate, clipped value loss, masked policies."""

from __future__ import annotations

import numpy as np

from .. import _kernels
from ..fnapprox import ParamNet

NEG = -1e30


def gae(rewards, values, dones, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and return targets R = A + V for a (T, K) block.

    ``values`` carries T + 1 rows (bootstrap last); ``dones[t]`` marks the
    state after step t as terminal.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if rewards.ndim == 1:
        adv, ret = gae(rewards[:, None], values[:, None], dones[:, None], gamma, lam)
        return adv[:, 0], ret[:, 0]
    if values.shape != (rewards.shape[0] + 1, rewards.shape[1]) or dones.shape != rewards.shape:
        raise ValueError(f"length mismatch: rewards {rewards.shape}, values {values.shape}, dones {dones.shape}")
    adv = np.asarray(_kernels.gae(rewards, values, dones, float(gamma), float(lam)))
    return adv, adv + values[:-1]


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    z = np.where(mask, logits, NEG)
    m = z.max(axis=-1, keepdims=True)
    out = z - m - np.log(np.sum(np.exp(z - m) * mask, axis=-1, keepdims=True))
    return np.where(mask, out, -np.inf)


def masked_probs(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    z = np.where(mask, logits, NEG)
    e = np.exp(z - z.max(axis=-1, keepdims=True)) * mask
    return e / e.sum(axis=-1, keepdims=True)


def sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    c = np.cumsum(probs, axis=1)
    c /= c[:, -1:]
    u = rng.random(len(probs))[:, None]
    return (c <= u).sum(axis=1)


def entropy(probs: np.ndarray) -> np.ndarray:
    logp = np.log(np.where(probs > 0, probs, 1.0))
    return -np.sum(probs * logp, axis=-1)


def clipped_surrogate(ratio, adv, clip: float) -> np.ndarray:
    """Per-sample min(r A, clip(r, 1 - eps, 1 + eps) A)."""
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv)


def ppo_actor_loss(net: ParamNet, x, actions, old_logp, adv, mask, clip: float, entropy_coef: float, with_grad: bool = True):
    """Negated clipped objective minus the entropy bonus, with gradients.

    Returns ``(loss, grads, info)``; ``info`` holds the surrogate, entropy,
    approximate KL and clip fraction.
    """
    actions = np.asarray(actions, dtype=np.int64)
    B = len(actions)
    logits = net.forward(x)
    p = masked_probs(logits, mask)
    logp_all = np.log(np.where(p > 0, p, 1.0))
    logp = logp_all[np.arange(B), actions]
    ratio = np.exp(logp - old_logp)
    surr = clipped_surrogate(ratio, adv, clip)
    ent = entropy(p)
    loss = -float(np.mean(surr)) - entropy_coef * float(np.mean(ent))
    info = {
        "surrogate": float(np.mean(surr)),
        "entropy": float(np.mean(ent)),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > clip)),
    }
    if not with_grad:
        return loss, None, info
    # the unclipped branch is the active one whenever it attains the min
    active = ratio * adv <= np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    coef = np.where(active, ratio * adv, 0.0)
    onehot = np.zeros_like(p)
    onehot[np.arange(B), actions] = 1.0
    d_surr = coef[:, None] * (onehot - p)
    d_ent = -p * (logp_all + ent[:, None])
    dz = -(d_surr + entropy_coef * d_ent) / B
    grads, _ = net.backward(np.where(mask, dz, 0.0))
    return loss, grads, info


def ppo_critic_loss(net: ParamNet, x, returns, old_values, clip: float, with_grad: bool = True):
    """mean(max((V - R)^2, (V_clip - R)^2)) with V_clip = V_old + clip(V - V_old, -eps, eps)."""
    v = net.forward(x)[:, 0]
    v_clip = old_values + np.clip(v - old_values, -clip, clip)
    e1 = (v - returns) ** 2
    e2 = (v_clip - returns) ** 2
    loss = float(np.mean(np.maximum(e1, e2)))
    if not with_grad:
        return loss, None
    inside = np.abs(v - old_values) < clip
    dv = np.where(e1 >= e2, 2.0 * (v - returns), np.where(inside, 2.0 * (v_clip - returns), 0.0))
    grads, _ = net.backward((dv / len(v))[:, None])
    return loss, grads


def critic_elementwise(v, old_values, returns, clip: float) -> np.ndarray:
    v_clip = old_values + np.clip(v - old_values, -clip, clip)
    return np.maximum((v - returns) ** 2, (v_clip - returns) ** 2)


def categorical_kl(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(np.where(p > 0, p, 1.0)) - np.log(q)), 0.0)
    return np.sum(terms, axis=-1)
