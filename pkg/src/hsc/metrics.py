"""Rate and distortion metrics, plus Bjontegaard-style curve deltas.

Exact metrics (MSE, PSNR) are computed directly. The perceptual and Frechet
metrics are desk-scale stand-ins built on one fixed, seeded, linear
convolutional feature extractor and are reported under a "toy-" prefix to
make their provenance unmistakable.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import autodiff as ad
from .errors import MetricError, ShapeError
from .numerics import Rng


class FixedFeatureExtractor:
    """Seeded random 3x3 conv, 3 -> n_features channels, no nonlinearity.

    Deliberately linear: doubling the weights doubles any norm-based
    distance computed on its features.
    """

    def __init__(self, seed=1234, n_features=8, in_channels=3):
        rng = Rng(seed, stream_id=77)
        fan_in = in_channels * 9
        self.weight = rng.normal((n_features, in_channels, 3, 3),
                                 scale=1.0 / math.sqrt(fan_in))
        self.n_features = n_features

    def __call__(self, x):
        return ad.conv2d(x, ad.const(self.weight), 1, 1)


def perceptual_distance_node(x_hat, x, extractor):
    from .training import loss_mlpips  # local import avoids a module cycle
    return loss_mlpips(x_hat, x, extractor)


def perceptual_distance(x_hat, x, extractor):
    """Multi-scale toy-perceptual distance between two (3, H, W) images."""
    a = ad.const(np.asarray(x_hat, float)[None])
    b = ad.const(np.asarray(x, float)[None])
    return float(perceptual_distance_node(a, b, extractor).value)


def mse(x_hat, x):
    x_hat = np.asarray(x_hat, float)
    x = np.asarray(x, float)
    if x_hat.shape != x.shape:
        raise ShapeError(f"mse: shapes {x_hat.shape} vs {x.shape}")
    return float(np.mean((x_hat - x) ** 2))


def psnr(x_hat, x, peak=1.0):
    """PSNR in dB against the given peak; +inf for identical inputs."""
    err = mse(x_hat, x)
    if err == 0.0:
        return float("inf")
    return float(10.0 * math.log10(peak * peak / err))


def pooled_features(images, extractor):
    """(N, 3, H, W) -> (N, 3 * n_features) pooled multi-scale features."""
    from .training import multi_scale_pyramid
    x = ad.const(np.asarray(images, float))
    feats = []
    for scale in multi_scale_pyramid(x):
        feats.append(extractor(scale).value.mean(axis=(2, 3)))
    return np.concatenate(feats, axis=1)


def frechet_distance(feats_a, feats_b):
    """Frechet distance between Gaussian fits of two feature clouds."""
    a = np.atleast_2d(np.asarray(feats_a, float))
    b = np.atleast_2d(np.asarray(feats_b, float))
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"frechet: feature dims {a.shape[1]} vs {b.shape[1]}")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.cov(a, rowvar=False) if a.shape[0] > 1 else np.zeros((a.shape[1],) * 2)
    cov_b = np.cov(b, rowvar=False) if b.shape[0] > 1 else np.zeros((b.shape[1],) * 2)
    cov_a = np.atleast_2d(cov_a)
    cov_b = np.atleast_2d(cov_b)
    prod = scipy.linalg.sqrtm(cov_a @ cov_b)
    if np.iscomplexobj(prod):
        prod = prod.real
    d2 = float(np.sum((mu_a - mu_b) ** 2)
               + np.trace(cov_a + cov_b - 2.0 * prod))
    return max(d2, 0.0)


def distortion_suite(xs, x_hats, extractor=None):
    """Metric map over batches of images (single images also accepted)."""
    xs = np.asarray(xs, float)
    x_hats = np.asarray(x_hats, float)
    if xs.ndim == 3:
        xs, x_hats = xs[None], x_hats[None]
    if xs.shape != x_hats.shape:
        raise ShapeError(f"distortion_suite: shapes {xs.shape} vs {x_hats.shape}")
    extractor = extractor or FixedFeatureExtractor()
    per = [perceptual_distance(a, b, extractor) for a, b in zip(x_hats, xs)]
    return {
        "mse": float(np.mean([mse(a, b) for a, b in zip(x_hats, xs)])),
        "psnr": float(np.mean([psnr(a, b) for a, b in zip(x_hats, xs)])),
        "toy-perceptual": float(np.mean(per)),
        "toy-frechet": frechet_distance(pooled_features(xs, extractor),
                                        pooled_features(x_hats, extractor)),
    }


def bpp(stream, image_dims):
    """Bits per pixel: 8 * container bytes / (H * W)."""
    n_bytes = len(stream) if isinstance(stream, (bytes, bytearray)) else int(stream)
    h, w = image_dims
    if h <= 0 or w <= 0:
        raise ShapeError(f"bpp: nonpositive image dims {(h, w)}")
    return 8.0 * n_bytes / (h * w)


# ---------------------------------------------------------------------------
# rate-distortion curves and BD deltas


@dataclass(frozen=True)
class RDPoint:
    bpp: float
    distortion: dict


class RDCurve:
    """Ordered RD points with strictly increasing bpp."""

    def __init__(self, points):
        self.points = list(points)
        bpps = [p.bpp for p in self.points]
        if any(b <= 0 for b in bpps):
            raise MetricError(f"nonpositive bpp in curve: {bpps}")
        if any(b2 <= b1 for b1, b2 in zip(bpps, bpps[1:])):
            raise MetricError(f"bpp not strictly increasing: {bpps}")

    def rates(self):
        return np.array([p.bpp for p in self.points])

    def metric(self, name):
        try:
            return np.array([p.distortion[name] for p in self.points])
        except KeyError:
            raise MetricError(f"metric {name!r} missing from curve") from None


def bd_metric(curve_a, curve_b, metric):
    """Average vertical gap (b minus a) between fitted RD curves.

    Each curve's metric is fitted as a cubic in log10(bpp); the difference
    of the fits is integrated exactly over the overlapping log-rate range
    and divided by its length. Negative means curve_b sits below curve_a
    (better, when lower is better).
    """
    for c in (curve_a, curve_b):
        if len(c.points) < 4:
            raise MetricError(f"BD needs >= 4 points per curve, got "
                              f"{len(c.points)}")
    ra = np.log10(curve_a.rates())
    rb = np.log10(curve_b.rates())
    lo = max(ra.min(), rb.min())
    hi = min(ra.max(), rb.max())
    if hi <= lo:
        raise MetricError("curves do not overlap in log-rate")
    pa = np.polyfit(ra, curve_a.metric(metric), 3)
    pb = np.polyfit(rb, curve_b.metric(metric), 3)
    integral = np.polyint(np.polysub(pb, pa))
    return float((np.polyval(integral, hi) - np.polyval(integral, lo))
                 / (hi - lo))
