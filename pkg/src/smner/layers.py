"""LSTM cell, bidirectional encoders, and the dense ReLU projection."""

from __future__ import annotations

import zlib

import numpy as np

from . import autodiff as ad


def param_rng(seed, name):
    """Independent, reproducible stream per named parameter.

    Keyed by (seed, crc32(name)) so adding or removing one component never
    shifts the initialization of any other.
    """
    return np.random.default_rng([int(seed), zlib.crc32(name.encode("utf-8"))])


class LstmParams:
    """Fused gate weights: [x; h] @ W + b -> (i, f, o, g). Forget bias starts at +1."""

    def __init__(self, name, input_dim, hidden_dim, seed):
        self.name = name
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        w = ad.glorot(param_rng(seed, f"{name}.W"), input_dim + hidden_dim, 4 * hidden_dim)
        b = np.zeros(4 * hidden_dim)
        b[hidden_dim:2 * hidden_dim] = 1.0
        self.W = ad.Parameter(f"{name}.W", w)
        self.b = ad.Parameter(f"{name}.b", b)

    def parameters(self):
        return [self.W, self.b]


class BiLstm:
    def __init__(self, name, input_dim, hidden_dim, seed):
        self.name = name
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.forward = LstmParams(f"{name}.fwd", input_dim, hidden_dim, seed)
        self.backward = LstmParams(f"{name}.bwd", input_dim, hidden_dim, seed)

    @property
    def output_dim(self):
        return 2 * self.hidden_dim

    def parameters(self):
        return self.forward.parameters() + self.backward.parameters()


def lstm_step(x, h, c, params):
    """One cell update: i,f,o = sigmoid, g = tanh, c' = f*c + i*g, h' = o*tanh(c')."""
    if x.value.shape[-1] != params.input_dim:
        raise ad.DimensionError(
            f"lstm input width {x.value.shape} does not match ({params.input_dim},)"
        )
    hd = params.hidden_dim
    pre = ad.add(ad.matmul(ad.concat([x, h]), params.W), params.b)
    i = ad.sigmoid(ad.slice_cols(pre, 0, hd))
    f = ad.sigmoid(ad.slice_cols(pre, hd, 2 * hd))
    o = ad.sigmoid(ad.slice_cols(pre, 2 * hd, 3 * hd))
    g = ad.tanh(ad.slice_cols(pre, 3 * hd, 4 * hd))
    c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_new = ad.mul(o, ad.tanh(c_new))
    return h_new, c_new


def run_lstm(rows, params):
    """Run the cell over a list of row nodes; returns all hidden states."""
    h = ad.constant(np.zeros(params.hidden_dim))
    c = ad.constant(np.zeros(params.hidden_dim))
    states = []
    for x in rows:
        h, c = lstm_step(x, h, c, params)
        states.append(h)
    return states


def bilstm_pool(rows, bi):
    """Final forward state ++ final backward state; zero vector for empty input."""
    if not rows:
        return ad.constant(np.zeros(bi.output_dim))
    fwd = run_lstm(rows, bi.forward)
    bwd = run_lstm(rows[::-1], bi.backward)
    return ad.concat([fwd[-1], bwd[-1]])


def bilstm_seq(rows, bi):
    """Per-step [forward_t ; backward_t] rows; same length as the input."""
    if not rows:
        return []
    fwd = run_lstm(rows, bi.forward)
    bwd = run_lstm(rows[::-1], bi.backward)[::-1]
    return [ad.concat([f, b]) for f, b in zip(fwd, bwd)]


class Dense:
    def __init__(self, name, input_dim, output_dim, seed):
        self.name = name
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.W = ad.Parameter(f"{name}.W", ad.glorot(param_rng(seed, f"{name}.W"),
                                                     input_dim, output_dim))
        self.b = ad.Parameter(f"{name}.b", np.zeros(output_dim))

    def parameters(self):
        return [self.W, self.b]


def dense_relu(r, dense):
    if r.value.shape[-1] != dense.input_dim:
        raise ad.DimensionError(
            f"dense input width {r.value.shape} does not match ({dense.input_dim},)"
        )
    return ad.relu(ad.add(ad.matmul(r, dense.W), dense.b))


def dense_linear(r, dense):
    return ad.add(ad.matmul(r, dense.W), dense.b)
