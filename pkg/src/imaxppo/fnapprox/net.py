"""Feed-forward nets with hand-written backprop.

A ``ParamNet`` is a stack of affine layers. Hidden layers apply an optional
LayerNorm and then the hidden activation; the output layer is affine only.
Inputs are batched as (B, in); a 1-D input is treated as a batch of one and
the output is squeezed back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "identity")
LN_EPS = 1e-5


class ShapeError(ValueError):
    pass


@dataclass
class Layer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    ln_gain: np.ndarray | None = None
    ln_bias: np.ndarray | None = None

    def params(self) -> list[np.ndarray]:
        out = [self.W, self.b]
        if self.ln_gain is not None:
            out += [self.ln_gain, self.ln_bias]
        return out


@dataclass
class ParamNet:
    sizes: list[int]
    activation: str = "relu"
    layer_norm: bool = False
    layers: list[Layer] = field(default_factory=list)
    _cache: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.sizes) < 2:
            raise ShapeError("need at least input and output widths")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if not self.layers:
            for k, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
                hidden = k < len(self.sizes) - 2
                norm = self.layer_norm and hidden
                self.layers.append(
                    Layer(
                        W=np.zeros((n_out, n_in)),
                        b=np.zeros(n_out),
                        ln_gain=np.ones(n_out) if norm else None,
                        ln_bias=np.zeros(n_out) if norm else None,
                    )
                )
        for k, layer in enumerate(self.layers):
            if layer.W.shape != (self.sizes[k + 1], self.sizes[k]):
                raise ShapeError(f"layer {k}: weight shape {layer.W.shape} does not chain")

    @property
    def in_width(self) -> int:
        return self.sizes[0]

    @property
    def out_width(self) -> int:
        return self.sizes[-1]

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def param_names(self) -> list[str]:
        names = []
        for k, layer in enumerate(self.layers):
            names += [f"{k}.W", f"{k}.b"]
            if layer.ln_gain is not None:
                names += [f"{k}.ln_gain", f"{k}.ln_bias"]
        return names

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_params():
            raise ShapeError(f"expected {self.n_params()} parameters, got {flat.size}")
        i = 0
        for p in self.params():
            p[...] = flat[i : i + p.size].reshape(p.shape)
            i += p.size

    def copy(self) -> ParamNet:
        out = ParamNet(list(self.sizes), self.activation, self.layer_norm)
        out.set_flat(self.get_flat())
        return out

    def is_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params())

    # ------------------------------------------------------------------
    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.in_width:
            raise ShapeError(f"input width {h.shape[1]} != {self.in_width}")
        cache = []
        last = len(self.layers) - 1
        for k, layer in enumerate(self.layers):
            z = h @ layer.W.T + layer.b
            entry = {"in": h}
            if k < last:
                if layer.ln_gain is not None:
                    mu = z.mean(axis=1, keepdims=True)
                    inv = 1.0 / np.sqrt(z.var(axis=1, keepdims=True) + LN_EPS)
                    zhat = (z - mu) * inv
                    entry.update(zhat=zhat, inv=inv)
                    z = zhat * layer.ln_gain + layer.ln_bias
                if self.activation == "relu":
                    entry["active"] = z > 0
                    z = np.where(entry["active"], z, 0.0)
            cache.append(entry)
            h = z
        self._cache = cache
        return h[0] if single else h

    __call__ = forward

    def backward(self, grad_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of sum(grad_out * output) wrt params (in ``params()`` order) and input."""
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        g = np.asarray(grad_out, dtype=np.float64)
        single = g.ndim == 1
        if single:
            g = g[None, :]
        grads: list[list[np.ndarray]] = []
        last = len(self.layers) - 1
        for k in range(last, -1, -1):
            layer, entry = self.layers[k], self._cache[k]
            layer_grads = []
            if k < last:
                if "active" in entry:
                    g = np.where(entry["active"], g, 0.0)
                if layer.ln_gain is not None:
                    zhat, inv = entry["zhat"], entry["inv"]
                    d_gain = (g * zhat).sum(axis=0)
                    d_bias = g.sum(axis=0)
                    gz = g * layer.ln_gain
                    g = inv * (gz - gz.mean(axis=1, keepdims=True) - zhat * (gz * zhat).mean(axis=1, keepdims=True))
                    layer_grads = [d_gain, d_bias]
            dW = g.T @ entry["in"]
            db = g.sum(axis=0)
            grads.append([dW, db] + layer_grads)
            g = g @ layer.W
        flat = [p for layer_grads in reversed(grads) for p in layer_grads]
        return flat, (g[0] if single else g)


def orthogonal_(W: np.ndarray, gain: float, rng: np.random.Generator) -> np.ndarray:
    """Fill ``W`` in place with a (semi-)orthogonal matrix scaled by ``gain``.

    The smaller dimension gets orthonormal vectors: W Wᵀ = gain² I when
    out <= in, Wᵀ W = gain² I otherwise.
    """
    rows, cols = W.shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
    if rows < cols:
        q = q.T
    W[...] = gain * q
    return W


def orthogonal_init(net: ParamNet, rng: np.random.Generator, gain: float = 0.01, hidden_gain: float = float(np.sqrt(2.0))) -> ParamNet:
    """Orthogonal weights and zero biases; ``gain`` applies to the output layer."""
    last = len(net.layers) - 1
    for k, layer in enumerate(net.layers):
        orthogonal_(layer.W, gain if k == last else hidden_gain, rng)
        layer.b[...] = 0.0
    return net


def make_net(sizes, rng, gain=0.01, hidden_gain=float(np.sqrt(2.0)), activation="relu", layer_norm=False) -> ParamNet:
    return orthogonal_init(ParamNet(list(sizes), activation, layer_norm), rng, gain, hidden_gain)
