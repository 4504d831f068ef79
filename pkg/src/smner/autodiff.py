"""Minimal dense-tensor reverse-mode autodiff over 64-bit numpy arrays.

Only the operations the sequence models actually need are provided. A
computation graph is built eagerly by the op functions below; calling
:func:`backward` on a scalar node accumulates gradients into every
reachable :class:`Parameter`.
"""

from __future__ import annotations

import struct

import numpy as np


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class Node:
    """One value in the computation graph.

    ``vjp`` maps the upstream gradient to a tuple of gradients aligned
    with ``parents``. Leaf nodes (constants, parameters) have no vjp.
    """

    __slots__ = ("value", "parents", "vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.vjp = vjp

    @property
    def shape(self):
        return self.value.shape


class Parameter(Node):
    """A named trainable tensor with a persistent gradient buffer."""

    __slots__ = ("name", "grad")

    def __init__(self, name, value):
        super().__init__(value)
        self.name = name
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad.fill(0.0)


def constant(x):
    return Node(x)


def _as_node(x):
    return x if isinstance(x, Node) else Node(x)


def _check_matmul(a, b):
    if a.value.ndim == 0 or b.value.ndim == 0 or a.value.shape[-1] != b.value.shape[0]:
        raise DimensionError(f"matmul shapes incompatible: {a.value.shape} @ {b.value.shape}")


def matmul(a, b):
    a, b = _as_node(a), _as_node(b)
    _check_matmul(a, b)

    def vjp(g):
        av, bv = a.value, b.value
        if av.ndim == 1:
            # (k,) @ (k,n) -> (n,)
            return bv @ g, np.outer(av, g)
        if bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return g @ bv.T, av.T @ g

    return Node(a.value @ b.value, (a, b), vjp)


def add(a, b):
    """Elementwise add; broadcasts a trailing bias vector over rows."""
    a, b = _as_node(a), _as_node(b)
    try:
        out = a.value + b.value
    except ValueError:
        raise DimensionError(f"add shapes incompatible: {a.value.shape} + {b.value.shape}") from None

    def vjp(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return Node(out, (a, b), vjp)


def _unbroadcast(g, shape):
    """Sum gradient g down to the given operand shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def mul(a, b):
    a, b = _as_node(a), _as_node(b)
    try:
        out = a.value * b.value
    except ValueError:
        raise DimensionError(f"mul shapes incompatible: {a.value.shape} * {b.value.shape}") from None

    def vjp(g):
        return _unbroadcast(g * b.value, a.value.shape), _unbroadcast(g * a.value, b.value.shape)

    return Node(out, (a, b), vjp)


def scale(a, c):
    a = _as_node(a)
    c = float(c)
    return Node(a.value * c, (a,), lambda g: (g * c,))


def sigmoid(a):
    a = _as_node(a)
    out = 1.0 / (1.0 + np.exp(-a.value))
    return Node(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a):
    a = _as_node(a)
    out = np.tanh(a.value)
    return Node(out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a):
    a = _as_node(a)
    mask = a.value > 0
    return Node(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def row_softmax(a):
    """Softmax along the last axis, max-shifted for stability."""
    a = _as_node(a)
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return Node(out, (a,), vjp)


def concat(nodes, axis=0):
    nodes = [_as_node(n) for n in nodes]
    out = np.concatenate([n.value for n in nodes], axis=axis)
    sizes = [n.value.shape[axis] for n in nodes]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(
            np.take(g, range(offsets[i], offsets[i + 1]), axis=axis) for i in range(len(nodes))
        )

    return Node(out, tuple(nodes), vjp)


def slice_cols(a, lo, hi):
    a = _as_node(a)
    out = a.value[..., lo:hi]

    def vjp(g):
        full = np.zeros_like(a.value)
        full[..., lo:hi] = g
        return (full,)

    return Node(out, (a,), vjp)


def row(a, i):
    a = _as_node(a)
    out = a.value[i]

    def vjp(g):
        full = np.zeros_like(a.value)
        full[i] = g
        return (full,)

    return Node(out, (a,), vjp)


def stack_rows(nodes):
    nodes = [_as_node(n) for n in nodes]
    out = np.stack([n.value for n in nodes])

    def vjp(g):
        return tuple(g[i] for i in range(len(nodes)))

    return Node(out, tuple(nodes), vjp)


def sum_all(a):
    a = _as_node(a)
    return Node(a.value.sum(), (a,), lambda g: (np.full_like(a.value, g),))


def dropout(a, p, train, rng):
    """Inverted dropout: kept activations scaled by 1/(1-p). Identity in eval mode."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    a = _as_node(a)
    if not train or p == 0.0:
        return a
    mask = (rng.random(a.value.shape) >= p) / (1.0 - p)
    return Node(a.value * mask, (a,), lambda g: (g * mask,))


def backward(loss):
    """Populate grads of all Parameters reachable from a scalar loss node."""
    if loss.value.shape != ():
        raise ValueError(f"backward requires a scalar loss, got shape {loss.value.shape}")
    if not np.isfinite(loss.value):
        raise FloatingPointError("backward called on a non-finite loss")

    # Iterative topological sort: deep graphs (BPTT chains) overflow recursion.
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))

    grads = {id(loss): np.ones(())}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if isinstance(node, Parameter):
            node.grad += g
            continue
        if node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


def glorot(rng, rows, cols):
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def finite_difference_check(loss_fn, params, epsilon=1e-5, max_coords=None, rng=None):
    """Compare analytic gradients of ``loss_fn`` against central differences.

    ``loss_fn`` must rebuild the forward graph (deterministically) on each
    call and return a scalar Node. Returns the max relative error over all
    checked coordinates; ``max_coords`` caps coordinates per parameter.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.value):
        raise FloatingPointError("loss is not finite")
    backward(loss)
    analytic = {p.name: p.grad.copy() for p in params}

    max_err = 0.0
    for p in params:
        flat = p.value.reshape(-1)
        n = flat.size
        if max_coords is not None and n > max_coords:
            picker = rng if rng is not None else np.random.default_rng(0)
            coords = picker.choice(n, size=max_coords, replace=False)
        else:
            coords = range(n)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + epsilon
            up = float(loss_fn().value)
            flat[i] = orig - epsilon
            down = float(loss_fn().value)
            flat[i] = orig
            numeric = (up - down) / (2.0 * epsilon)
            a = analytic[p.name].reshape(-1)[i]
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            max_err = max(max_err, err)
    return max_err


_CKPT_MAGIC = b"SMNR"
_CKPT_VERSION = 1


def save_checkpoint(tensors, path):
    """Write name -> float64 tensor map as little-endian binary with a version header."""
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<II", _CKPT_VERSION, len(tensors)))
        for name in sorted(tensors):
            # asarray rather than ascontiguousarray: the latter promotes 0-d to 1-d
            arr = np.asarray(tensors[name], dtype="<f8", order="C")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _CKPT_MAGIC:
            raise ValueError(f"not a checkpoint file: {path}")
        version, count = struct.unpack("<II", fh.read(8))
        if version != _CKPT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim)) if ndim else ()
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape)
            tensors[name] = data.astype(np.float64)
    return tensors
