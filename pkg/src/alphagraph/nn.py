"""Trainable layers and the optimizer, built on the autodiff primitives.

Parameters live in a flat ``dict[str, Tensor]`` keyed by dotted names
(``lstm.fwd.i.w`` etc.) so that checkpoints, ablation containment checks, and
the optimizer can treat every model uniformly.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ShapeError

GATES = ("i", "f", "g", "o")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape=None) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape if shape is not None else (fan_in, fan_out))


def param(values, params: dict, name: str) -> Tensor:
    t = Tensor(values, requires_grad=True)
    params[name] = t
    return t


def init_lstm_params(rng: np.random.Generator, in_dim: int, hidden: int,
                     params: dict, prefix: str) -> None:
    """Standard LSTM gate parameters; forget-gate bias starts at 1."""
    for gate in GATES:
        param(glorot_uniform(rng, in_dim, hidden), params, f"{prefix}.{gate}.w")
        param(glorot_uniform(rng, hidden, hidden), params, f"{prefix}.{gate}.u")
        bias = np.full(hidden, 1.0) if gate == "f" else np.zeros(hidden)
        param(bias, params, f"{prefix}.{gate}.b")


def lstm_cell(x, h_prev, c_prev, params: dict, prefix: str):
    """One LSTM step: returns (h_t, c_t).

    ``x`` may be a single input vector or an (N, in_dim) batch; hidden and
    cell states follow the same convention. No peepholes; sigmoid gates and
    tanh candidate/cell activations.
    """
    def gate(name, activation):
        z = ad.add(ad.affine(x, params[f"{prefix}.{name}.w"], params[f"{prefix}.{name}.b"]),
                   ad.matmul(h_prev, params[f"{prefix}.{name}.u"]))
        return activation(z)

    i = gate("i", ad.sigmoid)
    f = gate("f", ad.sigmoid)
    g = gate("g", ad.tanh)
    o = gate("o", ad.sigmoid)
    c_t = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
    h_t = ad.mul(o, ad.tanh(c_t))
    return h_t, c_t


def init_bilstm_params(rng: np.random.Generator, in_dim: int, hidden: int,
                       params: dict, prefix: str) -> None:
    init_lstm_params(rng, in_dim, hidden, params, f"{prefix}.fwd")
    init_lstm_params(rng, in_dim, hidden, params, f"{prefix}.bwd")


def bilstm(xs, hidden: int, params: dict, prefix: str):
    """Run forward and backward LSTM passes over a sequence.

    ``xs`` is a list of T tensors, each (in_dim,) or (N, in_dim). Returns a
    list of T outputs where output t is the concatenation of the forward
    state at t and the backward state at t (width 2*hidden).
    """
    if not xs:
        raise ShapeError("bilstm: empty input sequence")
    batched = xs[0].ndim == 2
    state_shape = (xs[0].shape[0], hidden) if batched else (hidden,)

    def run(seq, sub):
        h = Tensor(np.zeros(state_shape))
        c = Tensor(np.zeros(state_shape))
        out = []
        for x in seq:
            h, c = lstm_cell(x, h, c, params, f"{prefix}.{sub}")
            out.append(h)
        return out

    fwd = run(xs, "fwd")
    bwd = run(list(reversed(xs)), "bwd")
    bwd.reverse()
    return [ad.concat([f, b], axis=-1) for f, b in zip(fwd, bwd)]


def init_score_net(rng: np.random.Generator, in_dim: int, hidden: int,
                   params: dict, prefix: str) -> None:
    """Single-hidden-layer compatibility scorer: v . tanh(W x + b)."""
    param(glorot_uniform(rng, in_dim, hidden), params, f"{prefix}.w")
    param(np.zeros(hidden), params, f"{prefix}.b")
    param(glorot_uniform(rng, hidden, 1, shape=(hidden,)), params, f"{prefix}.v")


def score_net(x, params: dict, prefix: str):
    """Apply the scorer to (K, in_dim) rows -> (K,) scores, or 1-D -> scalar."""
    hidden = ad.tanh(ad.affine(x, params[f"{prefix}.w"], params[f"{prefix}.b"]))
    return ad.matmul(hidden, params[f"{prefix}.v"])


class Adam:
    """Bias-corrected Adam over a named parameter dict. Deterministic."""

    def __init__(self, params: dict, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ConfigError(f"Adam lr must be positive, got {lr}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {k: np.zeros_like(p.values) for k, p in params.items()}
        self._v = {k: np.zeros_like(p.values) for k, p in params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self):
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name in sorted(self.params):
            p = self.params[name]
            g = p.grad
            if g is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.values -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def adam_step(params: dict, optimizer: Adam) -> None:
    """Functional alias: apply one optimizer step to ``params`` in place."""
    if optimizer.params is not params:
        raise ConfigError("adam_step: optimizer was built for a different parameter set")
    optimizer.step()
