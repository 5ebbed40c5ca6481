"""Dense-tensor primitives, counter-based RNG and the normal CDF.

Everything runs in float64. Tensors are plain numpy arrays treated as
immutable values once returned; callers must not mutate results in place.
"""

import math

import numpy as np

from . import backend
from .errors import ShapeError

SQRT2 = math.sqrt(2.0)


def std_normal_cdf(z):
    """Standard normal CDF, elementwise.

    Evaluated as ``erfc(-z/sqrt(2))/2`` with a pinned Cody-style rational
    approximation so results do not depend on the platform libm. Absolute
    error is below 1e-15 against a high-precision reference.
    """
    z = np.asarray(z, dtype=np.float64)
    out = 0.5 * backend.erfc(-z / SQRT2)
    if out.ndim == 0:
        return float(out)
    return out


def std_normal_pdf(z):
    z = np.asarray(z, dtype=np.float64)
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


class Rng:
    """Counter-based random stream (Philox) keyed by (seed, stream id).

    Identical (seed, stream) pairs produce identical draws on every platform,
    and independent streams can be split off for parallel work without
    affecting reproducibility.
    """

    def __init__(self, seed, stream_id=0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def stream(self, stream_id):
        """Derive an independent stream with the same seed."""
        return Rng(self.seed, stream_id)

    def uniform_noise(self, shape):
        """I.i.d. draws from U(-1/2, 1/2)."""
        return self._gen.random(shape) - 0.5

    def normal(self, shape, scale=1.0):
        return self._gen.standard_normal(shape) * scale

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def choice(self, n, size, replace=True):
        return self._gen.choice(n, size=size, replace=replace)


def uniform_noise(shape, rng):
    """U(-1/2, 1/2) tensor of the given shape; empty shapes give empty tensors."""
    return rng.uniform_noise(shape)


def _require(cond, message):
    if not cond:
        raise ShapeError(message)


def add(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    _require(a.shape == b.shape, f"add: shapes {a.shape} vs {b.shape}")
    return a + b


def sub(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    _require(a.shape == b.shape, f"sub: shapes {a.shape} vs {b.shape}")
    return a - b


def scale(a, c):
    return np.asarray(a, float) * float(c)


def matmul(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    _require(a.ndim == 2 and b.ndim == 2 and a.shape[1] == b.shape[0],
             f"matmul: shapes {a.shape} vs {b.shape}")
    return a @ b


def reshape(a, shape):
    return np.reshape(np.asarray(a, float), shape)


def concat_channels(tensors):
    """Concatenate (C, H, W) or (N, C, H, W) tensors along the channel axis."""
    arrs = [np.asarray(t, float) for t in tensors]
    _require(len(arrs) > 0, "concat_channels: empty input")
    nd = arrs[0].ndim
    _require(nd in (3, 4), f"concat_channels: rank {nd} not in (3, 4)")
    axis = 0 if nd == 3 else 1
    spatial = [a.shape[:axis] + a.shape[axis + 1:] for a in arrs]
    _require(all(s == spatial[0] for s in spatial),
             f"concat_channels: spatial shapes differ: {[a.shape for a in arrs]}")
    return np.concatenate(arrs, axis=axis)


def conv2d(x, w, stride=1, pad=0):
    """2-D cross-correlation over NCHW input with an OIHW kernel.

    Output spatial size is ``floor((in + 2*pad - kernel)/stride) + 1``.
    A (C, H, W) input is treated as a batch of one.
    """
    x = np.asarray(x, float)
    w = np.asarray(w, float)
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    _require(x.ndim == 4 and w.ndim == 4,
             f"conv2d: ranks {x.ndim} and {w.ndim}, want 4 and 4")
    _require(x.shape[1] == w.shape[1],
             f"conv2d: input channels {x.shape[1]} vs kernel {w.shape[1]} "
             f"(shapes {x.shape} vs {w.shape})")
    _require(x.shape[2] + 2 * pad >= w.shape[2] and x.shape[3] + 2 * pad >= w.shape[3],
             f"conv2d: kernel {w.shape} larger than padded input {x.shape}")
    out = backend.conv2d_fwd(x, w, int(stride), int(pad))
    return out[0] if squeeze else out


def pool_mean(x):
    """Mean over the two trailing spatial axes: (..., C, H, W) -> (..., C)."""
    x = np.asarray(x, float)
    _require(x.ndim >= 3, f"pool_mean: rank {x.ndim} < 3")
    return x.mean(axis=(-2, -1))
