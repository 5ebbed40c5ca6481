"""Differentiable probability models for quantized latents.

Two models feed the range coder: a learned factorized density per channel
(used for the core-semantics latent) and a conditional Gaussian with
predicted mean and scale (used for the feature slices). Both integrate the
underlying density over unit bins centred on integers, matching the
additive-uniform-noise relaxation used during training.
"""

import enum
import math

import numpy as np

from . import autodiff as ad
from .autodiff import Param
from .errors import CoderError, ShapeError
from .numerics import std_normal_cdf

P_MIN = 2.0 ** -16   # probability floor so every symbol stays codable
SIGMA_MIN = 0.01     # scale floor; gradients vanish below it
LOG2 = math.log(2.0)


class QuantMode(enum.Enum):
    """NOISE during training (additive U(-1/2,1/2)), ROUND for coding."""
    NOISE = "noise"
    ROUND = "round"


def round_half_away(v):
    """Nearest integer, halves away from zero."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def quantize(v, mode, rng=None, noise=None):
    """Quantize a tensor by rounding or by adding uniform noise.

    In NOISE mode the perturbation comes from ``noise`` when given (so a
    draw can be replayed), otherwise from ``rng``.
    """
    v = np.asarray(v, dtype=np.float64)
    if mode is QuantMode.ROUND:
        return round_half_away(v)
    if noise is None:
        if rng is None:
            raise ValueError("NOISE mode needs an rng or an explicit noise draw")
        noise = rng.uniform_noise(v.shape)
    return v + noise


def quantize_node(v, noise):
    """NOISE-mode quantization inside the autodiff graph (gradient passes)."""
    return ad.add(v, ad.const(noise))


# ---------------------------------------------------------------------------
# rates


def rate_bits_node(probs):
    """Total bits sum(-log2 p) as a graph node."""
    return ad.scale(ad.sum_all(ad.log(probs)), -1.0 / LOG2)


def rate_bits(probs):
    """Total bits sum(-log2 p) of an array of probabilities in (0, 1]."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.size and (np.any(probs <= 0.0) or not np.all(np.isfinite(probs))):
        raise CoderError("rate_bits: nonpositive or non-finite probability "
                         "(upstream clamp failure)")
    if probs.size == 0:
        return 0.0
    return float(-(np.log2(probs)).sum())


# ---------------------------------------------------------------------------
# conditional Gaussian


def gaussian_bin_prob_node(mu, sigma, y_hat):
    """P(bin of width 1 centred at y_hat) under N(mu, sigma^2), clamped.

    ``sigma`` is clamped below at SIGMA_MIN and the probability at P_MIN;
    both clamps kill the gradient in their active region.
    """
    if mu.value.shape != sigma.value.shape or mu.value.shape != y_hat.value.shape:
        raise ShapeError(f"gaussian_bin_prob: shapes mu {mu.value.shape}, "
                         f"sigma {sigma.value.shape}, y {y_hat.value.shape}")
    sig = ad.clamp_min(sigma, SIGMA_MIN)
    centered = ad.sub(y_hat, mu)
    upper = ad.normal_cdf(ad.div(ad.shift(centered, 0.5), sig))
    lower = ad.normal_cdf(ad.div(ad.shift(centered, -0.5), sig))
    return ad.clamp_min(ad.sub(upper, lower), P_MIN)


def gaussian_bin_prob(mu, sigma, y_hat):
    """Array version of :func:`gaussian_bin_prob_node`."""
    p = gaussian_bin_prob_node(ad.const(mu), ad.const(sigma), ad.const(y_hat))
    return p.value


def gaussian_pmf_range(mu, sigma, lo, hi):
    """Bin masses over integers lo..hi plus the two-sided tail mass.

    Vectorized over flattened (mu, sigma); returns (pmf (n, hi-lo+1),
    tail (n,)). No probability floor is applied here; the table builder
    guarantees at least one unit of mass per slot.
    """
    mu = np.asarray(mu, dtype=np.float64).ravel()
    sigma = np.maximum(np.asarray(sigma, dtype=np.float64).ravel(), SIGMA_MIN)
    edges = np.arange(lo, hi + 2, dtype=np.float64) - 0.5
    z = (edges[None, :] - mu[:, None]) / sigma[:, None]
    cdf = std_normal_cdf(z)
    pmf = np.diff(cdf, axis=1)
    tail = cdf[:, 0] + (1.0 - cdf[:, -1])
    return np.maximum(pmf, 1e-300), np.maximum(tail, 1e-300)


# ---------------------------------------------------------------------------
# learned factorized density


class FactorizedDensity:
    """Monotone per-channel cumulative built from positive-weight layers.

    Each channel owns a stack of layers ``x -> softplus(W) x + b`` followed
    by the gate ``x + tanh(a) * tanh(x)`` on hidden layers and a sigmoid on
    the last, giving a strictly increasing map from the real line onto
    (0, 1). Bin probability of an integer v is c(v + 1/2) - c(v - 1/2).

    ``widths`` sets the hidden sizes; the default (3, 3, 3) gives four
    weight layers. At initialization every channel is approximately the
    logistic CDF with a small seeded jitter for symmetry breaking.
    """

    def __init__(self, channels, rng=None, widths=(3, 3, 3), jitter=0.01):
        self.channels = channels
        dims = (1,) + tuple(widths) + (1,)
        self.dims = dims
        self._weights = []
        self._biases = []
        self._gates = []
        for layer in range(len(dims) - 1):
            n_in, n_out = dims[layer], dims[layer + 1]
            # softplus(raw) == target up to jitter; targets chosen so the
            # end-to-end linear part composes to exactly 1 at init.
            target = 1.0 if layer == 0 else 1.0 / n_in
            raw = math.log(math.expm1(target))
            w = np.full((channels, n_out, n_in), raw)
            if rng is not None and jitter:
                w = w + rng.normal(w.shape, scale=jitter)
            self._weights.append(Param(w))
            b = np.zeros((channels, n_out, 1))
            if rng is not None and jitter:
                b = b + rng.normal(b.shape, scale=jitter)
            self._biases.append(Param(b))
            if layer < len(dims) - 2:
                self._gates.append(Param(np.zeros((channels, n_out, 1))))

    @classmethod
    def logistic(cls, channels=1):
        """Single-layer instance whose cumulative is exactly the logistic CDF."""
        return cls(channels, rng=None, widths=(), jitter=0.0)

    def params(self, prefix):
        out = {}
        for i, p in enumerate(self._weights):
            out[f"{prefix}.w{i}"] = p
        for i, p in enumerate(self._biases):
            out[f"{prefix}.b{i}"] = p
        for i, p in enumerate(self._gates):
            out[f"{prefix}.a{i}"] = p
        return out

    def cumulative_node(self, v):
        """Evaluate the cumulative; v is a node of shape (C, 1, n)."""
        h = v
        n_layers = len(self._weights)
        for layer in range(n_layers):
            w = ad.softplus(ad.leaf(self._weights[layer]))
            b = ad.leaf(self._biases[layer])
            h = ad.add(ad.bmm(w, h), b)
            if layer < n_layers - 1:
                gate = ad.tanh(ad.leaf(self._gates[layer]))
                h = ad.add(h, ad.mul(gate, ad.tanh(h)))
            else:
                h = ad.sigmoid(h)
        return h

    def bin_prob_node(self, v_hat):
        """Clamped bin probabilities for a (N, C) node of quantized values."""
        n, c = v_hat.value.shape
        if c != self.channels:
            raise ShapeError(f"factorized model has {self.channels} channels, "
                             f"input has {c}")
        flat = ad.reshape(v_hat, (n, c, 1))
        vt = _transpose_cn(flat)
        hi = self.cumulative_node(ad.shift(vt, 0.5))
        lo = self.cumulative_node(ad.shift(vt, -0.5))
        diff = ad.sub(hi, lo)
        return ad.clamp_min(_transpose_nc(diff), P_MIN)

    def bin_probs(self, v_hat):
        """Array version of :meth:`bin_prob_node` for (N, C) inputs."""
        return self.bin_prob_node(ad.const(np.atleast_2d(v_hat))).value

    def pmf_range(self, lo, hi):
        """Per-channel bin masses over integers lo..hi plus tail mass."""
        grid = np.arange(lo, hi + 2, dtype=np.float64) - 0.5
        v = np.broadcast_to(grid[None, None, :], (self.channels, 1, grid.size))
        cdf = self.cumulative_node(ad.const(v.copy())).value[:, 0, :]
        pmf = np.diff(cdf, axis=1)
        tail = cdf[:, 0] + (1.0 - cdf[:, -1])
        return np.maximum(pmf, 1e-300), np.maximum(tail, 1e-300)

    def validate_monotone(self, span=32.0, n_points=1001):
        """Check monotonicity and limits of each channel's cumulative on a grid."""
        grid = np.linspace(-span, span, n_points)
        v = np.broadcast_to(grid[None, None, :],
                            (self.channels, 1, n_points)).copy()
        cdf = self.cumulative_node(ad.const(v)).value[:, 0, :]
        if np.any(np.diff(cdf, axis=1) < 0.0):
            raise CoderError("factorized cumulative is not monotone")
        if np.any(cdf[:, 0] > 0.05) or np.any(cdf[:, -1] < 0.95):
            raise CoderError("factorized cumulative does not span (0, 1)")
        return True


def _transpose_cn(node):
    """(N, C, 1) -> (C, 1, N) inside the graph."""
    v = np.transpose(node.value, (1, 2, 0))
    return ad.Node(v, (node,), lambda g: (np.transpose(g, (2, 0, 1)),))


def _transpose_nc(node):
    """(C, 1, N) -> (N, C) inside the graph."""
    v = np.transpose(node.value[:, 0, :], (1, 0))
    c, _, n = node.value.shape
    def vjp(g):
        return (np.transpose(g, (1, 0)).reshape(c, 1, n),)
    return ad.Node(v, (node,), vjp)
