"""Plain-numpy MLP Q-network: forward, backward, Huber loss, Adam updates.

Shapes are fixed at 16 -> 512 -> 256 -> 9 with rectified-linear hidden
activations.  Gradients are computed by hand and verified against central
finite differences in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LAYER_SIZES = (16, 512, 256, 9)
HIDDEN_ACTIVATION = "relu"


def he_init(rng, fan_in, fan_out):
    return rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))


@dataclass
class QNet:
    weights: list
    biases: list

    @classmethod
    def create(cls, seed, sizes=LAYER_SIZES, dtype=np.float64):
        rng = np.random.default_rng(seed)
        ws, bs = [], []
        for a, b in zip(sizes[:-1], sizes[1:]):
            ws.append(he_init(rng, a, b).astype(dtype))
            bs.append(np.zeros(b, dtype=dtype))
        return cls(weights=ws, biases=bs)

    @property
    def sizes(self):
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])

    def forward(self, x):
        """(B, 16) -> (B, 9) Q-values."""
        h = np.asarray(x)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def forward_cached(self, x):
        """Forward pass keeping pre/post activations for backprop."""
        h = np.asarray(x)
        cache = [h]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            cache.append(h)
        out = h @ self.weights[-1] + self.biases[-1]
        return out, cache

    def backward(self, cache, dout):
        """Gradient of sum(loss) w.r.t. every parameter given dL/dout."""
        gw = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        grad = dout
        for layer in range(len(self.weights) - 1, -1, -1):
            h_in = cache[layer]
            gw[layer] = h_in.T @ grad
            gb[layer] = grad.sum(axis=0)
            if layer > 0:
                grad = (grad @ self.weights[layer].T) * (cache[layer] > 0.0)
        return gw, gb

    def copy(self):
        return QNet(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def load_from(self, other):
        for dst, src in zip(self.weights, other.weights):
            np.copyto(dst, src)
        for dst, src in zip(self.biases, other.biases):
            np.copyto(dst, src)

    def params(self):
        return self.weights + self.biases


def huber_loss_and_grad(pred, target, kappa=1.0):
    """Elementwise Huber loss and d(loss)/d(pred); target gets no gradient.

    With e = target - pred: quadratic e^2/2 inside |e| <= kappa, linear
    kappa*(|e| - kappa/2) beyond; the gradient magnitude saturates at kappa.
    """
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    e = np.asarray(target) - np.asarray(pred)
    ae = np.abs(e)
    quad = ae <= kappa
    loss = np.where(quad, 0.5 * e * e, kappa * (ae - 0.5 * kappa))
    grad = np.where(quad, -e, -kappa * np.sign(e))
    return loss, grad


def td_targets(rewards, dones, q_next, gamma):
    """r + gamma * (1 - done) * max_a q_next(a), elementwise over the batch."""
    rewards = np.asarray(rewards, float)
    dones = np.asarray(dones, float)
    return rewards + gamma * (1.0 - dones) * np.max(q_next, axis=1)


@dataclass
class Adam:
    """Adaptive moment optimizer over a QNet's parameter list."""

    net: QNet
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not self.m:
            self.m = [np.zeros_like(p) for p in self.net.params()]
            self.v = [np.zeros_like(p) for p in self.net.params()]

    def step(self, grads, lr):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.net.params(), grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
