from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from imaxppo.fnapprox import make_net
from imaxppo.marl.ppo import (
    categorical_kl,
    clipped_surrogate,
    critic_elementwise,
    gae,
    masked_log_softmax,
    masked_probs,
    ppo_actor_loss,
    ppo_critic_loss,
    sample_actions,
)


def fd(net, loss, h=1e-5):
    theta = net.get_flat()
    g = np.zeros_like(theta)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        net.set_flat(tp)
        lp = loss()
        net.set_flat(tm)
        lm = loss()
        g[i] = (lp - lm) / (2 * h)
    net.set_flat(theta)
    return g


def rel_err(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a) + np.abs(b)), 1e-12))


def test_gae_single_step():
    adv, ret = gae([[1.0]], [[0.5], [2.0]], [[0.0]], 0.9, 0.95)
    assert np.isclose(adv[0, 0], 1.0 + 0.9 * 2.0 - 0.5)
    assert np.isclose(ret[0, 0], adv[0, 0] + 0.5)
    adv, _ = gae([[1.0]], [[0.5], [2.0]], [[1.0]], 0.9, 0.95)
    assert np.isclose(adv[0, 0], 0.5)


def test_gae_lambda_zero_is_td():
    rng = np.random.default_rng(0)
    r, v = rng.normal(size=(6, 3)), rng.normal(size=(7, 3))
    d = (rng.random((6, 3)) < 0.3).astype(float)
    adv, _ = gae(r, v, d, 0.9, 0.0)
    assert np.allclose(adv, r + 0.9 * v[1:] * (1 - d) - v[:-1], atol=1e-14)


def test_gae_monte_carlo_limit():
    r = np.array([1.0, 2.0, 3.0, 4.0])
    adv, _ = gae(r, np.zeros(5), np.zeros(4), 1.0, 1.0)
    assert np.allclose(adv, [10, 9, 7, 4])


def test_gae_length_mismatch():
    import pytest

    with pytest.raises(ValueError):
        gae(np.zeros((3, 2)), np.zeros((3, 2)), np.zeros((3, 2)), 0.9, 0.9)


def test_clip_arithmetic():
    assert np.isclose(clipped_surrogate(np.array([1.5]), np.array([1.0]), 0.2)[0], 1.2)
    assert np.isclose(clipped_surrogate(np.array([0.5]), np.array([-1.0]), 0.2)[0], -0.8)


@given(st.floats(0.01, 10), st.floats(-10, 10), st.floats(0.05, 0.5))
def test_surrogate_pessimism(r, a, eps):
    assert clipped_surrogate(np.array([r]), np.array([a]), eps)[0] <= r * a + 1e-12


def test_critic_arithmetic():
    out = critic_elementwise(np.array([1.0]), np.array([0.5]), np.array([2.0]), 0.2)
    assert np.isclose(out[0], 1.69)
    assert critic_elementwise(np.array([3.0]), np.array([3.0]), np.array([3.0]), 0.2)[0] == 0.0


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(0.05, 0.5))
def test_critic_max_identity(v, old, ret, eps):
    e = critic_elementwise(np.array([v]), np.array([old]), np.array([ret]), eps)[0]
    vc = old + np.clip(v - old, -eps, eps)
    assert e == max((v - ret) ** 2, (vc - ret) ** 2)
    assert e >= min((v - ret) ** 2, (vc - ret) ** 2)


def _batch(seed, B=16, A=5, W=6):
    rng = np.random.default_rng(seed)
    net = make_net([W, 8, A], rng, gain=1.0)
    x = rng.normal(size=(B, W))
    mask = rng.random((B, A)) < 0.8
    mask[:, 0] = True
    probs = masked_probs(net.forward(x), mask)
    actions = sample_actions(probs, rng)
    return rng, net, x, mask, probs, actions


def test_actor_no_clip_point_is_vanilla_pg():
    rng, net, x, mask, probs, actions = _batch(1)
    adv = rng.normal(size=len(x))
    old_logp = np.log(probs[np.arange(len(x)), actions])
    loss, grads, info = ppo_actor_loss(net, x, actions, old_logp, adv, mask, 0.2, 0.0)
    assert np.isclose(info["surrogate"], adv.mean(), atol=1e-14)
    assert info["clip_frac"] == 0.0
    # score-function oracle: -mean(A grad log pi(a|x))
    logits = net.forward(x)
    onehot = np.eye(probs.shape[1])[actions]
    g_out = -(adv[:, None] * (onehot - probs)) / len(x)
    oracle, _ = net.backward(np.where(mask, g_out, 0.0))
    for a, b in zip(grads, oracle):
        assert np.allclose(a, b, atol=1e-14)


def test_actor_grad_fd():
    rng, net, x, mask, probs, actions = _batch(2)
    adv = rng.normal(size=len(x))
    old_logp = np.log(probs[np.arange(len(x)), actions]) + rng.normal(scale=0.3, size=len(x))
    _, grads, _ = ppo_actor_loss(net, x, actions, old_logp, adv, mask, 0.2, 0.01)
    num = fd(net, lambda: ppo_actor_loss(net, x, actions, old_logp, adv, mask, 0.2, 0.01, with_grad=False)[0])
    assert rel_err(np.concatenate([g.ravel() for g in grads]), num) < 1e-3


def test_critic_grad_fd():
    rng = np.random.default_rng(3)
    net = make_net([5, 8, 1], rng, gain=1.0)
    x = rng.normal(size=(20, 5))
    ret = rng.normal(size=20)
    old = net.forward(x)[:, 0] + rng.normal(scale=0.3, size=20)
    _, grads = ppo_critic_loss(net, x, ret, old, 0.2)
    num = fd(net, lambda: ppo_critic_loss(net, x, ret, old, 0.2, with_grad=False)[0])
    assert rel_err(np.concatenate([g.ravel() for g in grads]), num) < 1e-3


def test_masking():
    logits = np.array([[1.0, 50.0, -2.0]])
    mask = np.array([[True, False, True]])
    p = masked_probs(logits, mask)
    assert p[0, 1] == 0.0 and np.isclose(p.sum(), 1.0)
    assert np.isneginf(masked_log_softmax(logits, mask)[0, 1])
    a = sample_actions(np.repeat(p, 1000, axis=0), np.random.default_rng(0))
    assert not np.any(a == 1)


def test_kl_zero_for_identical():
    p = np.array([[0.2, 0.8, 0.0]])
    assert categorical_kl(p, p)[0] == 0.0
