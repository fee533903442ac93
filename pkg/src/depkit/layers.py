"""Neural layers composed from the autodiff primitives.

Initialization follows Normal(0, 2/(fan_in + fan_out)) for dense and
convolution weights; LSTM forget-gate biases start at 1.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class RegularizationConfig:
    gaussian_dropout_rate: float = 0.25
    gaussian_noise_std: float = 0.2
    dense_dropout: float = 0.25
    recurrent_dropout: float = 0.25
    l2_network: float = 1e-6
    l2_embeddings: float = 1e-5


def glorot(rng, shape):
    fan_in, fan_out = shape[0], shape[-1]
    if len(shape) == 3:  # conv kernel (k, c_in, c_out)
        fan_in = shape[0] * shape[1]
        fan_out = shape[0] * shape[2]
    std = (2.0 / (fan_in + fan_out)) ** 0.5
    return rng.normal(0.0, std, size=shape).astype(np.float32)


_ACTIVATIONS = {
    "tanh": ad.tanh,
    "relu": ad.relu,
    "linear": lambda x: x,
    "softmax": ad.softmax_rows,
}


class Dense:
    """Fully connected layer; input dropout is applied at train time."""

    def __init__(self, d_in, d_out, activation="tanh", rng=None, dropout=0.25):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation
        self.dropout = dropout
        self.W = Tensor(glorot(rng, (d_in, d_out)), requires_grad=True)
        self.b = Tensor(np.zeros(d_out, dtype=np.float32), requires_grad=True)

    def __call__(self, x, train=False, rng=None):
        x = ad.dropout(x, self.dropout, train, rng)
        z = ad.add(ad.matmul(x, self.W), self.b)
        return _ACTIVATIONS[self.activation](z)

    def named_params(self):
        return [("W", self.W), ("b", self.b)]


class EmbeddingTable:
    """Trainable lookup table of row vectors."""

    def __init__(self, n_rows, dim, rng):
        scale = 1.0 / dim ** 0.5
        self.table = Tensor(
            rng.normal(0.0, scale, size=(n_rows, dim)).astype(np.float32),
            requires_grad=True,
        )

    def __call__(self, indices):
        return ad.take_rows(self.table, indices)

    def named_params(self):
        return [("table", self.table)]


class DilatedConv1d:
    """Same-length 1-d convolution layer with a dilation rate."""

    def __init__(self, kernel_size, c_in, c_out, dilation, activation="relu", rng=None):
        self.dilation = dilation
        self.activation = activation
        self.kernel = Tensor(glorot(rng, (kernel_size, c_in, c_out)), requires_grad=True)
        self.b = Tensor(np.zeros(c_out, dtype=np.float32), requires_grad=True)

    def __call__(self, x):
        z = ad.add(ad.dilated_conv1d(x, self.kernel, self.dilation), self.b)
        return _ACTIVATIONS[self.activation](z)

    def named_params(self):
        return [("kernel", self.kernel), ("b", self.b)]


class ConvStack:
    """Sequence of dilated convolutions, ReLU after each layer."""

    def __init__(self, c_in, filters, dilations, kernel_size, rng_pool, name):
        self.layers = []
        prev = c_in
        for i, (c_out, dil) in enumerate(zip(filters, dilations)):
            layer = DilatedConv1d(
                kernel_size, prev, c_out, dil,
                activation="relu", rng=rng_pool.derive(f"{name}.conv{i}"),
            )
            self.layers.append(layer)
            prev = c_out
        self.c_out = prev

    def __call__(self, x):
        for layer in self.layers:
            x = layer(x)
        return x

    def named_params(self):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend((f"conv{i}.{n}", p) for n, p in layer.named_params())
        return out


class LSTMLayer:
    """One direction of an LSTM; gate layout is [input, forget, cell, output].

    Standard and recurrent dropout both use a single mask fixed for the
    whole sequence (variational style).
    """

    def __init__(self, d_in, hidden, rng, dropout=0.25, recurrent_dropout=0.25):
        self.d_in = d_in
        self.hidden = hidden
        self.dropout = dropout
        self.recurrent_dropout = recurrent_dropout
        self.W = Tensor(glorot(rng, (d_in, 4 * hidden)), requires_grad=True)
        self.U = Tensor(glorot(rng, (hidden, 4 * hidden)), requires_grad=True)
        b = np.zeros(4 * hidden, dtype=np.float32)
        b[hidden:2 * hidden] = 1.0
        self.b = Tensor(b, requires_grad=True)

    def __call__(self, xs, train=False, rng=None):
        h_dim = self.hidden
        n = xs.shape[0]
        if train and self.dropout > 0.0:
            keep = (rng.random((1, self.d_in)) >= self.dropout).astype(np.float32)
            xs = ad.mul(xs, Tensor(keep / (1.0 - self.dropout)))
        rec_mask = None
        if train and self.recurrent_dropout > 0.0:
            keep = (rng.random((1, h_dim)) >= self.recurrent_dropout).astype(np.float32)
            rec_mask = Tensor(keep / (1.0 - self.recurrent_dropout))

        pre = ad.add(ad.matmul(xs, self.W), self.b)  # (T, 4H), all steps at once
        h = Tensor(np.zeros((1, h_dim), dtype=np.float32))
        c = Tensor(np.zeros((1, h_dim), dtype=np.float32))
        outputs = []
        for t in range(n):
            h_in = ad.mul(h, rec_mask) if rec_mask is not None else h
            z = ad.add(ad.take_rows(pre, [t]), ad.matmul(h_in, self.U))
            i = ad.sigmoid(ad.slice_cols(z, 0, h_dim))
            f = ad.sigmoid(ad.slice_cols(z, h_dim, 2 * h_dim))
            g = ad.tanh(ad.slice_cols(z, 2 * h_dim, 3 * h_dim))
            o = ad.sigmoid(ad.slice_cols(z, 3 * h_dim, 4 * h_dim))
            c = ad.add(ad.mul(f, c), ad.mul(i, g))
            h = ad.mul(o, ad.tanh(c))
            outputs.append(h)
        return ad.concat(outputs, axis=0)

    def named_params(self):
        return [("W", self.W), ("U", self.U), ("b", self.b)]


class BiLSTMStack:
    """Stacked bidirectional LSTM with Gaussian dropout and Gaussian noise
    applied to the output of every layer at train time."""

    def __init__(self, d_in, hidden, n_layers, rng_pool, name,
                 reg: RegularizationConfig | None = None):
        self.reg = reg or RegularizationConfig()
        self.layers = []
        prev = d_in
        for i in range(n_layers):
            fwd = LSTMLayer(prev, hidden, rng_pool.derive(f"{name}.l{i}.fwd"),
                            self.reg.dense_dropout, self.reg.recurrent_dropout)
            bwd = LSTMLayer(prev, hidden, rng_pool.derive(f"{name}.l{i}.bwd"),
                            self.reg.dense_dropout, self.reg.recurrent_dropout)
            self.layers.append((fwd, bwd))
            prev = 2 * hidden
        self.d_out = prev

    def __call__(self, xs, train=False, rng=None):
        for fwd, bwd in self.layers:
            n = xs.shape[0]
            flip = list(range(n - 1, -1, -1))
            hf = fwd(xs, train, rng)
            hb = bwd(ad.take_rows(xs, flip), train, rng)
            out = ad.concat([hf, ad.take_rows(hb, flip)], axis=1)
            out = ad.gaussian_dropout(out, self.reg.gaussian_dropout_rate, train, rng)
            out = ad.gaussian_noise(out, self.reg.gaussian_noise_std, train, rng)
            xs = out
        return xs

    def named_params(self):
        out = []
        for i, (fwd, bwd) in enumerate(self.layers):
            out.extend((f"l{i}.fwd.{n}", p) for n, p in fwd.named_params())
            out.extend((f"l{i}.bwd.{n}", p) for n, p in bwd.named_params())
        return out
