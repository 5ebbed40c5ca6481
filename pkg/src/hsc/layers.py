"""Parameterized layers built on the autodiff engine."""

import numpy as np

from . import autodiff as ad
from .autodiff import Param


class Linear:
    """y = x @ W + b for (N, n_in) inputs; W stored as (n_in, n_out)."""

    def __init__(self, rng, n_in, n_out, gain=1.0, zero_init=False):
        if zero_init:
            w = np.zeros((n_in, n_out))
        else:
            w = rng.normal((n_in, n_out), scale=gain / np.sqrt(n_in))
        self.weight = Param(w)
        self.bias = Param(np.zeros(n_out))

    def __call__(self, x):
        y = ad.matmul(x, ad.leaf(self.weight))
        return ad.add(y, ad.reshape(ad.leaf(self.bias), (1, -1)))

    def params(self, prefix):
        return {prefix + ".weight": self.weight, prefix + ".bias": self.bias}


class Conv2d:
    """Convolution with bias over NCHW tensors; kernel is (c_out, c_in, k, k)."""

    def __init__(self, rng, c_in, c_out, kernel, stride=1, pad=None, gain=1.0):
        if pad is None:
            pad = kernel // 2
        self.stride = stride
        self.pad = pad
        fan_in = c_in * kernel * kernel
        self.weight = Param(rng.normal((c_out, c_in, kernel, kernel),
                                       scale=gain / np.sqrt(fan_in)))
        self.bias = Param(np.zeros(c_out))

    def __call__(self, x):
        y = ad.conv2d(x, ad.leaf(self.weight), self.stride, self.pad)
        return ad.add(y, ad.reshape(ad.leaf(self.bias), (1, -1, 1, 1)))

    def params(self, prefix):
        return {prefix + ".weight": self.weight, prefix + ".bias": self.bias}
