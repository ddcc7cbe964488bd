from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from imaxppo.fnapprox import (
    Adam,
    NonFiniteGradientError,
    ParamNet,
    RunningNorm,
    ShapeError,
    clip_global_norm,
    load_nets,
    make_net,
    orthogonal_,
    running_normalize,
    save_nets,
)


def random_net(sizes, seed=0, layer_norm=False, activation="relu"):
    net = ParamNet(sizes, activation, layer_norm)
    rng = np.random.default_rng(seed)
    net.set_flat(rng.normal(scale=0.7, size=net.n_params()))
    return net


def oracle_forward(net, x):
    h = x
    for k, layer in enumerate(net.layers):
        z = np.array([sum(layer.W[o, i] * h[i] for i in range(len(h))) + layer.b[o] for o in range(len(layer.b))])
        if k < len(net.layers) - 1:
            if layer.ln_gain is not None:
                z = (z - z.mean()) / np.sqrt(z.var() + 1e-5) * layer.ln_gain + layer.ln_bias
            if net.activation == "relu":
                z = np.maximum(z, 0.0)
        h = z
    return h


def fd_grad(net, loss, h=1e-5):
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
    return np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b)))


def test_zero_net_outputs_zero():
    net = ParamNet([3, 4, 2])
    assert np.array_equal(net.forward(np.ones(3)), np.zeros(2))


def test_identity_layer():
    net = ParamNet([3, 3], activation="identity")
    net.layers[0].W[...] = np.eye(3)
    x = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(net.forward(x), x)


@pytest.mark.parametrize("layer_norm", [False, True])
def test_forward_matches_oracle(layer_norm):
    net = random_net([5, 7, 6, 3], seed=1, layer_norm=layer_norm)
    x = np.random.default_rng(2).normal(size=5)
    assert np.max(np.abs(net.forward(x) - oracle_forward(net, x))) < 1e-12


def test_width_mismatch():
    with pytest.raises(ShapeError):
        ParamNet([3, 2]).forward(np.zeros(4))


def test_backward_before_forward():
    with pytest.raises(RuntimeError):
        ParamNet([3, 2]).backward(np.zeros(2))


def test_zero_output_grad():
    net = random_net([4, 5, 2])
    net.forward(np.ones(4))
    grads, _ = net.backward(np.zeros(2))
    assert all(not g.any() for g in grads)


def test_linear_grad_is_input():
    net = ParamNet([3, 1], activation="identity")
    x = np.array([0.3, -1.0, 2.0])
    net.forward(x)
    grads, _ = net.backward(np.ones(1))
    assert np.array_equal(grads[0][0], x)


@pytest.mark.parametrize("layer_norm", [False, True])
def test_backward_matches_finite_differences(layer_norm):
    net = random_net([4, 6, 5, 3], seed=3, layer_norm=layer_norm)
    rng = np.random.default_rng(4)
    x = rng.normal(size=(8, 4))
    w = rng.normal(size=(8, 3))

    def loss():
        return float(np.sum(w * net.forward(x)))

    net.forward(x)
    grads, gx = net.backward(w)
    analytic = np.concatenate([g.ravel() for g in grads])
    assert rel_err(analytic, fd_grad(net, loss)) < 1e-4
    # input gradient too
    eps = 1e-6
    num = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        num[idx] = (np.sum(w * net.forward(xp)) - np.sum(w * net.forward(xm))) / (2 * eps)
    assert rel_err(gx, num) < 1e-4


def test_orthogonal_init():
    rng = np.random.default_rng(0)
    w = orthogonal_(np.zeros((1, 1)), 0.3, rng)
    assert abs(abs(w[0, 0]) - 0.3) < 1e-15
    assert not orthogonal_(np.ones((3, 3)), 0.0, rng).any()
    w = orthogonal_(np.zeros((4, 4)), 0.01, rng)
    assert np.max(np.abs(w @ w.T - 1e-4 * np.eye(4))) < 1e-6
    wide = orthogonal_(np.zeros((3, 7)), 2.0, rng)
    assert np.max(np.abs(wide @ wide.T - 4 * np.eye(3))) < 1e-6
    tall = orthogonal_(np.zeros((7, 3)), 2.0, rng)
    assert np.max(np.abs(tall.T @ tall - 4 * np.eye(3))) < 1e-6


def test_adam_zero_grad():
    p = [np.array([1.0, 2.0])]
    opt = Adam.for_params(p, lr=0.1)
    opt.step(p, [np.zeros(2)])
    assert np.array_equal(p[0], [1.0, 2.0])
    # primed moments decay geometrically under zero gradient
    opt.m[0][...] = 1.0
    opt.step(p, [np.zeros(2)])
    assert np.allclose(opt.m[0], 0.9)


def test_adam_first_step():
    p = [np.array([0.0])]
    opt = Adam.for_params(p, lr=0.01, eps=1e-12)
    opt.step(p, [np.array([3.0])])
    assert abs(p[0][0] + 0.01) < 1e-9


def test_adam_quadratic():
    p = [np.array([1.0])]
    opt = Adam.for_params(p, lr=0.1)
    for _ in range(100):
        opt.step(p, [2 * p[0]])
    assert abs(p[0][0]) < 0.05


def test_adam_rejects_nan():
    p = [np.array([1.0])]
    opt = Adam.for_params(p)
    with pytest.raises(NonFiniteGradientError):
        opt.step(p, [np.array([np.nan])])
    assert p[0][0] == 1.0 and opt.t == 0


def test_clip_global_norm():
    g = [np.array([3.0, 4.0])]
    out, n = clip_global_norm(g, 10)
    assert n == 5 and np.array_equal(out[0], g[0])
    out, _ = clip_global_norm([np.array([12.0, 16.0])], 10)
    assert np.allclose(out[0], [6.0, 8.0])


@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(-1e3, 1e3)), st.floats(0.1, 50))
def test_clip_norm_bound(g, max_norm):
    out, _ = clip_global_norm([g], max_norm)
    assert np.linalg.norm(out[0]) <= max_norm + 1e-9


def test_running_norm():
    norm = RunningNorm()
    assert np.allclose(running_normalize(norm, [1.0, 1.0, 1.0]), 0.0)
    rng = np.random.default_rng(0)
    a, b = rng.normal(2, 3, 50), rng.normal(-1, 0.5, 70)
    n2 = RunningNorm()
    n2.update(a)
    n2.update(b)
    both = np.concatenate([a, b])
    assert abs(n2.mean - both.mean()) < 1e-10 and abs(n2.var - both.var()) < 1e-10
    x = rng.normal(size=10)
    assert np.max(np.abs(n2.denormalize(n2.normalize(x)) - x)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (6, 4), elements=st.floats(-10, 10)), st.integers(0, 2**31))
def test_updates_stay_finite(x, seed):
    net = make_net([4, 8, 3], np.random.default_rng(seed), gain=1.0, layer_norm=True)
    opt = Adam.for_params(net.params(), lr=1e-2)
    for _ in range(3):
        y = net.forward(x)
        grads, _ = net.backward(2 * y)
        grads, _ = clip_global_norm(grads, 10.0)
        opt.step(net.params(), grads)
        assert net.is_finite()


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    nets = {"psi_Q": make_net([3, 4, 2], rng), "psi_pi": make_net([3, 5, 2], rng, layer_norm=True)}
    path = save_nets(tmp_path / "m.ckpt", nets, {"iter": 7})
    loaded, meta = load_nets(path)
    assert meta["iter"] == 7
    for role, net in nets.items():
        assert np.array_equal(loaded[role].get_flat(), net.get_flat())
    assert (tmp_path / "m.ckpt.json").exists()
