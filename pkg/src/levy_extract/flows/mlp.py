"""Fully connected conditioner network with manual backpropagation."""

import numpy as np


class MLP:
    """tanh network ``sizes[0] -> ... -> sizes[-1]`` with a linear output layer.

    The output layer starts at zero so a freshly built flow is the identity.
    """

    def __init__(self, sizes, rng=None, zero_output=True):
        self.sizes = tuple(int(s) for s in sizes)
        rng = np.random.default_rng(0) if rng is None else rng
        self.weights = []
        self.biases = []
        last = len(self.sizes) - 2
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            if i == last and zero_output:
                w = np.zeros((fan_in, fan_out))
            else:
                bound = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-bound, bound, (fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def get_params(self):
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def set_params(self, flat):
        pos = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = np.asarray(flat[pos:pos + w.size], dtype=float).reshape(w.shape)
            pos += w.size
            self.biases[i] = np.asarray(flat[pos:pos + b.size], dtype=float).copy()
            pos += b.size
        return pos

    def forward(self, x):
        acts = [x]
        h = x
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < n_layers - 1:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, acts, gout):
        """Return (gradient w.r.t. input, flat parameter gradient)."""
        grads = []
        g = gout
        n_layers = len(self.weights)
        for i in range(n_layers - 1, -1, -1):
            if i < n_layers - 1:
                g = g * (1.0 - acts[i + 1] ** 2)
            grads.append((acts[i].T @ g, g.sum(axis=0)))
            g = g @ self.weights[i].T
        parts = []
        for gw, gb in reversed(grads):
            parts.append(gw.ravel())
            parts.append(gb)
        return g, np.concatenate(parts)
