"""Reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Node` wraps a value plus the recipe for propagating gradients to
its parents; every op below defines its analytic vector-Jacobian product.
Graphs are built eagerly and freed after :func:`backward`. Parameters are
plain :class:`Param` holders; wrap one with :func:`leaf` inside an active
:class:`Tape` to have its gradient collected.

The engine is deliberately small: only the ops the codec needs, no
broadcasting beyond what those ops require, single-threaded use only.
"""

import numpy as np

from . import backend
from .errors import ShapeError


class Node:
    __slots__ = ("value", "parents", "vjp", "grad")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.vjp = vjp
        self.grad = None

    @property
    def shape(self):
        return self.value.shape


class Param:
    """A trainable array. ``value`` is mutated by the optimizer only."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None


class Tape:
    """Records (param, node) pairs created by :func:`leaf` while active."""

    def __init__(self):
        self.pairs = []

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("autodiff tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def grads(self):
        """Per-param gradient sums, keyed by id(param). Unused params -> zeros."""
        out = {}
        for param, node in self.pairs:
            g = node.grad
            if g is None:
                g = np.zeros_like(param.value)
            key = id(param)
            if key in out:
                out[key] = out[key] + g
            else:
                out[key] = g
        return out


_ACTIVE_TAPE = None


def leaf(param):
    node = Node(param.value)
    if _ACTIVE_TAPE is not None:
        _ACTIVE_TAPE.pairs.append((param, node))
    return node


def const(value):
    return Node(value)


def backward(root):
    """Accumulate gradients of a scalar ``root`` into every graph node."""
    if root.value.ndim != 0:
        raise ShapeError(f"backward: root has shape {root.value.shape}, want scalar")
    order = []
    seen = set()
    stack = [(root, False)]
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
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.grad is None or node.vjp is None:
            continue
        for parent, g in zip(node.parents, node.vjp(node.grad)):
            if g is None:
                continue
            if parent.grad is None:
                parent.grad = g
            else:
                parent.grad = parent.grad + g


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape))
                 if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b):
    v = a.value + b.value
    return Node(v, (a, b), lambda g: (_unbroadcast(g, a.value.shape),
                                      _unbroadcast(g, b.value.shape)))


def sub(a, b):
    v = a.value - b.value
    return Node(v, (a, b), lambda g: (_unbroadcast(g, a.value.shape),
                                      _unbroadcast(-g, b.value.shape)))


def mul(a, b):
    v = a.value * b.value
    return Node(v, (a, b), lambda g: (_unbroadcast(g * b.value, a.value.shape),
                                      _unbroadcast(g * a.value, b.value.shape)))


def div(a, b):
    v = a.value / b.value
    def vjp(g):
        ga = _unbroadcast(g / b.value, a.value.shape)
        gb = _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape)
        return ga, gb
    return Node(v, (a, b), vjp)


def neg(a):
    return Node(-a.value, (a,), lambda g: (-g,))


def scale(a, c):
    c = float(c)
    return Node(a.value * c, (a,), lambda g: (g * c,))


def shift(a, c):
    c = float(c)
    return Node(a.value + c, (a,), lambda g: (g,))


def square(a):
    return Node(a.value * a.value, (a,), lambda g: (2.0 * a.value * g,))


def sqrt(a):
    v = np.sqrt(a.value)
    def vjp(g):
        return (np.where(v > 0.0, 0.5 * g / np.where(v > 0.0, v, 1.0), 0.0),)
    return Node(v, (a,), vjp)


def exp(a):
    v = np.exp(a.value)
    return Node(v, (a,), lambda g: (g * v,))


def log(a):
    return Node(np.log(a.value), (a,), lambda g: (g / a.value,))


def tanh(a):
    v = np.tanh(a.value)
    return Node(v, (a,), lambda g: (g * (1.0 - v * v),))


def sigmoid(a):
    v = 1.0 / (1.0 + np.exp(-a.value))
    return Node(v, (a,), lambda g: (g * v * (1.0 - v),))


def softplus(a):
    x = a.value
    v = np.logaddexp(0.0, x)
    s = 1.0 / (1.0 + np.exp(-x))
    return Node(v, (a,), lambda g: (g * s,))


def clamp_min(a, floor):
    """max(a, floor); gradient is zero wherever the floor engages."""
    floor = float(floor)
    keep = a.value > floor
    v = np.where(keep, a.value, floor)
    return Node(v, (a,), lambda g: (np.where(keep, g, 0.0),))


def normal_cdf(a):
    v = 0.5 * backend.erfc(-a.value / np.sqrt(2.0))
    pdf = np.exp(-0.5 * a.value * a.value) / np.sqrt(2.0 * np.pi)
    return Node(v, (a,), lambda g: (g * pdf,))


# ---------------------------------------------------------------------------
# reductions and shape ops


def sum_all(a):
    return Node(a.value.sum(), (a,),
                lambda g: (np.broadcast_to(g, a.value.shape).copy(),))


def mean_all(a):
    n = a.value.size
    return Node(a.value.mean(), (a,),
                lambda g: (np.broadcast_to(g / n, a.value.shape).copy(),))


def reshape(a, shape):
    old = a.value.shape
    return Node(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(nodes, axis=1):
    vals = [n.value for n in nodes]
    v = np.concatenate(vals, axis=axis)
    sizes = [x.shape[axis] for x in vals]
    splits = np.cumsum(sizes)[:-1]
    return Node(v, tuple(nodes), lambda g: tuple(np.split(g, splits, axis=axis)))


def channel_slice(a, start, stop, axis=1):
    idx = [slice(None)] * a.value.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    def vjp(g):
        out = np.zeros_like(a.value)
        out[idx] = g
        return (out,)
    return Node(a.value[idx], (a,), vjp)


def matmul(a, b):
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(f"matmul: shapes {a.value.shape} vs {b.value.shape}")
    v = a.value @ b.value
    return Node(v, (a, b), lambda g: (g @ b.value.T, a.value.T @ g))


def bmm(a, b):
    """Batched matmul: (C, m, k) @ (C, k, n) -> (C, m, n)."""
    if a.value.shape[0] != b.value.shape[0] or a.value.shape[2] != b.value.shape[1]:
        raise ShapeError(f"bmm: shapes {a.value.shape} vs {b.value.shape}")
    v = a.value @ b.value
    def vjp(g):
        return (g @ b.value.transpose(0, 2, 1), a.value.transpose(0, 2, 1) @ g)
    return Node(v, (a, b), vjp)


# ---------------------------------------------------------------------------
# spatial ops (NCHW)


def conv2d(x, w, stride=1, pad=0):
    if x.value.ndim != 4 or w.value.ndim != 4 or x.value.shape[1] != w.value.shape[1]:
        raise ShapeError(f"conv2d: shapes {x.value.shape} vs {w.value.shape}")
    stride = int(stride)
    pad = int(pad)
    v = backend.conv2d_fwd(x.value, w.value, stride, pad)
    _, _, h, wd = x.value.shape
    _, _, kh, kw = w.value.shape
    def vjp(g):
        g = np.ascontiguousarray(g)
        gx = backend.conv2d_grad_input(g, w.value, stride, pad, h, wd)
        gw = backend.conv2d_grad_weight(g, x.value, stride, pad, kh, kw)
        return gx, gw
    return Node(v, (x, w), vjp)


def upsample2(x):
    """Nearest-neighbour 2x upsampling of (N, C, H, W)."""
    v = x.value.repeat(2, axis=2).repeat(2, axis=3)
    n, c, h, w = x.value.shape
    def vjp(g):
        return (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)
    return Node(v, (x,), vjp)


def avgpool2(x):
    """2x2 mean pooling of (N, C, H, W); H and W must be even."""
    n, c, h, w = x.value.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avgpool2: odd spatial size {(h, w)}")
    v = x.value.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    def vjp(g):
        return (g.repeat(2, axis=2).repeat(2, axis=3) * 0.25,)
    return Node(v, (x,), vjp)


def spatial_mean(x):
    """(N, C, H, W) -> (N, C) mean over space."""
    n, c, h, w = x.value.shape
    v = x.value.mean(axis=(2, 3))
    def vjp(g):
        return (np.broadcast_to(g[:, :, None, None] / (h * w), x.value.shape).copy(),)
    return Node(v, (x,), vjp)


def spatial_broadcast(v, h, w):
    """(N, C) -> (N, C, H, W) by repeating each channel value over space."""
    n, c = v.value.shape
    out = np.broadcast_to(v.value[:, :, None, None], (n, c, h, w)).copy()
    def vjp(g):
        return (g.sum(axis=(2, 3)),)
    return Node(out, (v,), vjp)
