"""Inversion encoder: image -> (style codes, mid-level feature).

Residual downsampling stages process the image until the spatial size of the
generator's early-path output; the last stage's (un-pooled) map is the
mid-level feature. Spatially pooled vectors from every stage are
concatenated and fed to one linear head per style code.
"""

import numpy as np

from . import autodiff as ad
from .errors import ShapeError
from .layers import Conv2d, Linear


class _ResStage:
    def __init__(self, rng, c_in, c_out, stride):
        self.down = Conv2d(rng, c_in, c_out, 3, stride=stride, gain=1.0)
        self.res = Conv2d(rng, c_out, c_out, 3, gain=0.7)

    def __call__(self, h):
        h = ad.tanh(self.down(h))
        return ad.tanh(ad.add(self.res(h), h))

    def params(self, prefix):
        out = self.down.params(prefix + ".down")
        out.update(self.res.params(prefix + ".res"))
        return out


class InversionEncoder:
    def __init__(self, rng, img_res, img_channels, feature_res, feature_channels,
                 n_codes, style_dim, width=16):
        strides = []
        res = img_res
        while res > feature_res:
            strides.append(2)
            res //= 2
        strides.append(1)  # final stride-1 stage emits the feature map
        self.stages = []
        c_in = img_channels
        for s in strides:
            self.stages.append(_ResStage(rng, c_in, width, s))
            c_in = width
        # the feature head must match the generator's early-path channels
        if width != feature_channels:
            raise ShapeError(f"stage width {width} != feature channels "
                             f"{feature_channels}")
        pooled_dim = width * len(self.stages)
        self.heads = [Linear(rng, pooled_dim, style_dim, gain=0.5)
                      for _ in range(n_codes)]
        self.img_res = img_res
        self.img_channels = img_channels
        self.n_codes = n_codes
        self.style_dim = style_dim

    def params(self):
        out = {}
        for i, st in enumerate(self.stages):
            out.update(st.params(f"inversion.stage{i}"))
        for j, head in enumerate(self.heads):
            out.update(head.params(f"inversion.head{j}"))
        return out

    def __call__(self, x):
        """(N, 3, R, R) image node -> (codes (N, m, d), feature (N, C, h, w))."""
        if x.value.ndim != 4 or x.value.shape[1:] != (self.img_channels,
                                                      self.img_res, self.img_res):
            raise ShapeError(f"inversion input shape {x.value.shape[1:]}, want "
                             f"({self.img_channels}, {self.img_res}, {self.img_res})")
        pooled = []
        h = x
        for stage in self.stages:
            h = stage(h)
            pooled.append(ad.spatial_mean(h))
        feature = h
        stack = ad.concat(pooled, axis=1)
        n = x.value.shape[0]
        codes = [ad.reshape(head(stack), (n, 1, self.style_dim))
                 for head in self.heads]
        return ad.concat(codes, axis=1), feature
