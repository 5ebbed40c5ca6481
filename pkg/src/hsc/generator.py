"""Toy style-based generator with a split synthesis path.

A small mapping MLP turns latents z into a style vector w; the synthesis
network starts from a learned constant and runs 8 modulated conv blocks at
resolutions 4,4,8,8,16,16,32,32 followed by an RGB head. Block i consumes
style code i, so a split index t cuts the generator into an early part
(codes 1..t, producing the mid-level feature) and a late part (codes
t+1..m, producing the image). The generator is seeded once and then frozen;
it plays the role of a pretrained backbone.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Param
from .errors import ShapeError
from .layers import Conv2d, Linear
from .numerics import Rng


@dataclass(frozen=True)
class GeneratorConfig:
    latent_dim: int = 8
    style_dim: int = 8
    n_codes: int = 8          # one style code per synthesis block
    channels: int = 16
    base_res: int = 4
    img_channels: int = 3

    @property
    def n_blocks(self):
        return self.n_codes

    @property
    def img_res(self):
        # two blocks per resolution stage, doubling every stage
        return self.base_res * 2 ** ((self.n_blocks - 1) // 2)

    def block_res(self, i):
        """Output resolution of block i (0-based)."""
        return self.base_res * 2 ** (i // 2)

    def feature_res(self, t):
        """Spatial size of the early-path output for split index t."""
        return self.block_res(t - 1)


class _SynthBlock:
    """Modulated conv block: conv, then per-channel affine from the style code."""

    def __init__(self, rng, channels, style_dim, style_gain):
        self.conv = Conv2d(rng, channels, channels, 3, gain=1.0)
        self.mod_gain = Linear(rng, style_dim, channels, gain=style_gain)
        self.mod_bias = Linear(rng, style_dim, channels, gain=style_gain)

    def __call__(self, h, code):
        h = self.conv(h)
        gain = ad.shift(self.mod_gain(code), 1.0)
        bias = self.mod_bias(code)
        n, c = gain.value.shape
        h = ad.mul(h, ad.reshape(gain, (n, c, 1, 1)))
        h = ad.add(h, ad.reshape(bias, (n, c, 1, 1)))
        return ad.tanh(h)

    def params(self, prefix):
        out = {}
        out.update(self.conv.params(prefix + ".conv"))
        out.update(self.mod_gain.params(prefix + ".gain"))
        out.update(self.mod_bias.params(prefix + ".bias"))
        return out


class ToyGenerator:
    """Frozen seeded generator; all forward paths run through the autodiff ops."""

    def __init__(self, config=GeneratorConfig(), seed=0, style_gain=0.6):
        self.config = config
        rng = Rng(seed, stream_id=90)
        self.map1 = Linear(rng, config.latent_dim, 16, gain=1.2)
        self.map2 = Linear(rng, 16, config.style_dim, gain=1.2)
        self.base = Param(rng.normal((config.channels, config.base_res,
                                      config.base_res), scale=0.5))
        self.blocks = [_SynthBlock(rng, config.channels, config.style_dim, style_gain)
                       for _ in range(config.n_blocks)]
        self.to_rgb = Conv2d(rng, config.channels, config.img_channels, 1, gain=1.5)

    # -- parameters ---------------------------------------------------------

    def params(self):
        out = {"generator.base": self.base}
        out.update(self.map1.params("generator.map1"))
        out.update(self.map2.params("generator.map2"))
        for i, blk in enumerate(self.blocks):
            out.update(blk.params(f"generator.block{i}"))
        out.update(self.to_rgb.params("generator.rgb"))
        return out

    # -- forward paths ------------------------------------------------------

    def map_latent(self, z):
        """(N, latent_dim) -> (N, style_dim) style vector."""
        return self.map2(ad.tanh(self.map1(z)))

    def _base_node(self, n):
        c = self.config
        base = ad.leaf(self.base)
        return ad.Node(np.broadcast_to(base.value[None], (n, *base.value.shape)).copy(),
                       (base,), lambda g: (g.sum(axis=0),))

    def _check_codes(self, codes, n_expected):
        if codes.value.ndim != 3 or codes.value.shape[1] != n_expected \
                or codes.value.shape[2] != self.config.style_dim:
            raise ShapeError(f"style codes shape {codes.value.shape}, want "
                             f"(N, {n_expected}, {self.config.style_dim})")

    def _run_blocks(self, h, codes, start, stop):
        for i in range(start, stop):
            if i >= 2 and i % 2 == 0:
                h = ad.upsample2(h)
            code = ad.reshape(ad.channel_slice(codes, i - start, i - start + 1),
                              (codes.value.shape[0], self.config.style_dim))
            h = self.blocks[i](h, code)
        return h

    def synthesize(self, codes):
        """Full path: (N, m, style_dim) codes -> (N, 3, R, R) image."""
        self._check_codes(codes, self.config.n_codes)
        h = self._base_node(codes.value.shape[0])
        h = self._run_blocks(h, codes, 0, self.config.n_blocks)
        return ad.sigmoid(self.to_rgb(h))

    def run_early(self, codes_early, t):
        """Blocks 1..t: (N, t, style_dim) codes -> mid-level feature."""
        self._check_codes(codes_early, t)
        h = self._base_node(codes_early.value.shape[0])
        return self._run_blocks(h, codes_early, 0, t)

    def run_late(self, codes_late, feature, t):
        """Blocks t+1..m on a given feature -> image."""
        m = self.config.n_blocks
        self._check_codes(codes_late, m - t)
        res = self.config.feature_res(t)
        want = (self.config.channels, res, res)
        if feature.value.shape[1:] != want:
            raise ShapeError(f"feature shape {feature.value.shape[1:]}, want {want}")
        h = self._run_blocks(feature, codes_late, t, m)
        return ad.sigmoid(self.to_rgb(h))


def broadcast_codes(w, n_codes):
    """Repeat one style vector per code slot: (N, d) -> (N, m, d) node."""
    n, d = w.value.shape
    out = np.broadcast_to(w.value[:, None, :], (n, n_codes, d)).copy()
    return ad.Node(out, (w,), lambda g: (g.sum(axis=1),))


def sample_dataset(generator, n, rng, noise_std=0.01):
    """Draw images from the generator plus observation noise.

    Returns (images (N, 3, R, R) in [0, 1], style targets (N, m, d)): the
    style vector of each sample is the ground-truth inversion target for
    every code slot.
    """
    cfg = generator.config
    z = rng.stream(1).normal((n, cfg.latent_dim))
    w = generator.map_latent(ad.const(z))
    codes = broadcast_codes(w, cfg.n_codes)
    imgs = generator.synthesize(codes).value
    noisy = imgs + rng.stream(2).normal(imgs.shape, scale=noise_std)
    return np.clip(noisy, 0.0, 1.0), codes.value
