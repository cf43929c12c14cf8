"""Minimal numpy training utilities: init, Adam, softmax cross-entropy, MLP."""
from __future__ import annotations

import numpy as np


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def log_softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    return np.exp(log_softmax(z, axis))


def cross_entropy(logits: np.ndarray, labels: np.ndarray, idx: np.ndarray):
    """Mean softmax cross-entropy over rows ``idx`` and its gradient w.r.t. all logits."""
    lp = log_softmax(logits[idx])
    loss = -lp[np.arange(len(idx)), labels[idx]].mean()
    g_rows = np.exp(lp)
    g_rows[np.arange(len(idx)), labels[idx]] -= 1.0
    grad = np.zeros_like(logits)
    grad[idx] = g_rows / len(idx)
    return float(loss), grad


def accuracy(logits: np.ndarray, labels: np.ndarray, idx) -> float:
    idx = np.asarray(idx)
    if len(idx) == 0:
        return 0.0
    return float(np.mean(np.argmax(logits[idx], axis=1) == labels[idx]))


class Adam:
    """Adam over a list of arrays, updated in place."""

    def __init__(self, params, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


class MLP:
    """Fully connected ReLU network with a linear output layer."""

    def __init__(self, weights, biases):
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]

    @classmethod
    def init(cls, dims, rng: np.random.Generator) -> "MLP":
        ws = [xavier_uniform(rng, a, b) for a, b in zip(dims[:-1], dims[1:])]
        bs = [np.zeros(b) for b in dims[1:]]
        return cls(ws, bs)

    @property
    def params(self):
        return [*self.weights, *self.biases]

    def forward(self, x):
        """Return the output and a cache for :meth:`backward`."""
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def backward(self, acts, grad_out):
        """Gradients ``[dW..., db...]`` given d(loss)/d(output)."""
        gw, gb = [], []
        g = grad_out
        for k in range(len(self.weights) - 1, -1, -1):
            if k < len(self.weights) - 1:
                g = g * (acts[k + 1] > 0)
            gw.append(acts[k].T @ g)
            gb.append(g.sum(axis=0))
            g = g @ self.weights[k].T
        return [*gw[::-1], *gb[::-1]]

    def __call__(self, x):
        return self.forward(x)[0]
