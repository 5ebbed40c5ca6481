"""Context-model ablations on synthetic correlated data.

Builds feature maps whose channels correlate with a code vector and with
each other, trains the slice-wise Gaussian context model on them, and
measures rates under three conditions: the full model, the same model with
its semantic prior zeroed, and a single-slice model without channel context.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape
from .entropy_models import (gaussian_bin_prob_node, quantize_node,
                             rate_bits_node, round_half_away)
from .layers import Conv2d, Linear
from .numerics import Rng
from .training import MomentumSGD


@dataclass
class SyntheticContextData:
    codes: np.ndarray  # (N, code_dim)
    maps: np.ndarray   # (N, channels, res, res)


def synthesize_correlated(rng, n, code_dim=16, channels=16, res=8,
                          code_gain=1.3, shared_noise=0.8, own_noise=0.25):
    """Feature maps driven by a code vector plus cross-channel shared noise."""
    codes = rng.stream(1).normal((n, code_dim))
    mix = rng.stream(2).normal((code_dim, channels), scale=code_gain
                               / np.sqrt(code_dim))
    base = codes @ mix  # (N, C)
    shared = rng.stream(3).normal((n, 1, res, res), scale=shared_noise)
    own = rng.stream(4).normal((n, channels, res, res), scale=own_noise)
    maps = base[:, :, None, None] + shared + own
    return SyntheticContextData(codes, maps)


class ContextOnlyModel:
    """Prior plus slice-wise Gaussian context heads over given feature maps."""

    def __init__(self, seed, code_dim, channels, n_slices, res,
                 prior_channels=8):
        rng = Rng(seed, stream_id=30)
        self.res = res
        self.channels = channels
        self.prior_channels = prior_channels
        base = channels // n_slices
        self.slice_sizes = [base] * n_slices
        self.slice_sizes[-1] += channels - base * n_slices
        self.prior = Linear(rng, code_dim, prior_channels, gain=1.0)
        self.ctx = []
        in_ch = prior_channels
        for size in self.slice_sizes:
            self.ctx.append((Conv2d(rng, in_ch, 16, 3, gain=1.0),
                             Conv2d(rng, 16, 2 * size, 3, gain=0.5)))
            in_ch += size

    def parameters(self):
        out = list(self.prior.params("prior").values())
        for i, (a, b) in enumerate(self.ctx):
            out.extend(a.params(f"ctx{i}a").values())
            out.extend(b.params(f"ctx{i}b").values())
        return out

    def _prior_node(self, codes, zero_prior):
        vec = ad.tanh(self.prior(codes))
        prior = ad.spatial_broadcast(vec, self.res, self.res)
        if zero_prior:
            prior = ad.const(np.zeros_like(prior.value))
        return prior

    def rate_node(self, codes, maps_q, zero_prior=False):
        """Total bits for a batch of already-quantized maps."""
        prior = self._prior_node(codes, zero_prior)
        rate = None
        decoded = []
        start = 0
        for i, size in enumerate(self.slice_sizes):
            inputs = [prior] + decoded
            h = ad.concat(inputs, axis=1) if len(inputs) > 1 else prior
            c1, c2 = self.ctx[i]
            out = c2(ad.tanh(c1(h)))
            mu = ad.channel_slice(out, 0, size)
            sigma = ad.softplus(ad.channel_slice(out, size, 2 * size))
            y_i = ad.channel_slice(maps_q, start, start + size)
            term = rate_bits_node(gaussian_bin_prob_node(mu, sigma, y_i))
            rate = term if rate is None else ad.add(rate, term)
            decoded.append(y_i)
            start += size

        return rate

    def train(self, data, steps, seed, lr=3e-4, momentum=0.95, batch=16):
        rng = Rng(seed, stream_id=31)
        noise_rng = Rng(seed, stream_id=32)
        opt = MomentumSGD(self.parameters(), lr, momentum)
        n = data.codes.shape[0]
        order = rng.permutation(n)
        pos = 0
        for _ in range(steps):
            if pos + batch > n:
                order = rng.permutation(n)
                pos = 0
            idx = order[pos:pos + batch]
            pos += batch
            codes = ad.const(data.codes[idx])
            noise = noise_rng.uniform_noise(data.maps[idx].shape)
            with Tape() as tape:
                maps_q = quantize_node(ad.const(data.maps[idx]), noise)
                loss = ad.scale(self.rate_node(codes, maps_q), 1.0 / batch)
            ad.backward(loss)
            opt.step(tape.grads())
        return self

    def mean_round_rate(self, data, zero_prior=False):
        """Mean per-sample bits with ROUND quantization (no coding)."""
        maps_q = round_half_away(data.maps)
        rate = self.rate_node(ad.const(data.codes), ad.const(maps_q),
                              zero_prior=zero_prior)
        return float(rate.value) / data.codes.shape[0]


def run_context_ablation(seed=5, n_train=512, n_eval=200, steps=400,
                         channels=16, n_slices=8):
    """Train the k-slice and single-slice variants; return mean rates.

    Returns a dict with mean bits per sample for: the contextual model,
    the same model with a zeroed prior, and the single-slice model.
    """
    rng = Rng(seed)
    train_data = synthesize_correlated(rng.stream(1), n_train,
                                       channels=channels)
    eval_data = synthesize_correlated(rng.stream(2), n_eval,
                                      channels=channels)
    code_dim = train_data.codes.shape[1]
    full = ContextOnlyModel(seed, code_dim, channels, n_slices,
                            train_data.maps.shape[-1])
    full.train(train_data, steps, seed)
    single = ContextOnlyModel(seed + 1, code_dim, channels, 1,
                              train_data.maps.shape[-1])
    single.train(train_data, steps, seed + 1)
    return {
        "with_context": full.mean_round_rate(eval_data),
        "zero_prior": full.mean_round_rate(eval_data, zero_prior=True),
        "single_slice": single.mean_round_rate(eval_data),
    }
