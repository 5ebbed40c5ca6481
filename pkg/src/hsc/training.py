"""Losses and the three-stage optimization.

Stage 1 fits the inversion encoder against reconstruction, multi-scale
perceptual and feature-consistency losses (generator frozen). Stage 2
freezes inversion too and rate-distortion-trains the two codec branches in
noise-quantized mode. Stage 3 optimizes everything except the generator
jointly. All gradients are analytic through the autodiff engine.

Conventions, recorded here because the formulas leave them open: image MSE
and the feature-consistency loss are means over elements; code and feature
distortions inside the RD losses are plain sums of squared errors; rates
are total bits per sample, averaged over the batch.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Param, Tape
from .entropy_models import (gaussian_bin_prob_node, quantize_node,
                             rate_bits_node)
from .errors import ShapeError, TrainingDiverged
from .numerics import Rng


@dataclass(frozen=True)
class LossWeights:
    """The five loss multipliers (perceptual, consistency, two RD, joint)."""

    perceptual: float = 0.8
    consistency: float = 1.0
    semantic_distortion: float = 0.01
    feature_distortion: float = 0.01
    inversion: float = 1.0


@dataclass(frozen=True)
class TrainSchedule:
    steps_inversion: int = 2000
    steps_rd: int = 2000
    steps_joint: int = 1000
    lr: float = 1e-4
    momentum: float = 0.95
    batch_size: int = 8
    seed: int = 7
    grad_clip: float = 10.0  # global-norm ceiling; rate terms spike early


@dataclass
class ToyDataset:
    images: np.ndarray        # (N, 3, R, R)
    target_codes: np.ndarray  # (N, m, d) ground-truth style vectors


# ---------------------------------------------------------------------------
# losses


def loss_mse(x_hat, x):
    """Mean squared error over all elements."""
    if x_hat.value.shape != x.value.shape:
        raise ShapeError(f"mse: shapes {x_hat.value.shape} vs {x.value.shape}")
    return ad.mean_all(ad.square(ad.sub(x_hat, x)))


def multi_scale_pyramid(x, n_scales=3):
    """x plus (n_scales - 1) successive 2x mean-downsamplings."""
    h, w = x.value.shape[-2:]
    need = 2 ** (n_scales - 1)
    if h % need or w % need or h < need * 2 or w < need * 2:
        raise ShapeError(f"image {h}x{w} too small to downsample "
                         f"{n_scales - 1} times")
    scales = [x]
    for _ in range(n_scales - 1):
        scales.append(ad.avgpool2(scales[-1]))
    return scales


def loss_mlpips(x_hat, x, extractor):
    """Multi-scale feature distance under a fixed linear extractor.

    Sum over 3 scales of the l2 norm of the feature difference; linear in
    the extractor weights, zero exactly when the images match.
    """
    total = None
    for a, b in zip(multi_scale_pyramid(x_hat), multi_scale_pyramid(x)):
        diff = ad.sub(extractor(a), extractor(b))
        term = ad.sqrt(ad.sum_all(ad.square(diff)))
        total = term if total is None else ad.add(total, term)
    return total


def loss_fsc(feature, codes_early, generator, t):
    """Feature consistency: mean squared gap to the generator's early path."""
    early = generator.run_early(codes_early, t)
    if feature.value.shape != early.value.shape:
        raise ShapeError(f"fsc: shapes {feature.value.shape} vs "
                         f"{early.value.shape}")
    return ad.mean_all(ad.square(ad.sub(feature, early)))


def loss_inversion(x_hat, x, feature, codes_early, generator, t, extractor,
                   weights):
    """Reconstruction + perceptual + consistency composite."""
    mse = loss_mse(x_hat, x)
    mlp = loss_mlpips(x_hat, x, extractor)
    fsc = loss_fsc(feature, codes_early, generator, t)
    total = ad.add(mse, ad.add(ad.scale(mlp, weights.perceptual),
                               ad.scale(fsc, weights.consistency)))
    return total, {"mse": mse, "mlpips": mlp, "fsc": fsc}


def semantic_rd_terms(models, codes, noise):
    """Noise-mode pass of the semantic branch: rate, distortion, decoded codes."""
    s_lat = models.semantic.analyze(codes)
    s_noisy = quantize_node(s_lat, noise)
    probs = models.semantic.density.bin_prob_node(s_noisy)
    rate = rate_bits_node(probs)
    codes_hat = models.semantic.synthesize_codes(s_noisy)
    dist = ad.sum_all(ad.square(ad.sub(codes_hat, codes)))
    return rate, dist, codes_hat


def feature_rd_terms(models, feature, codes_hat, noise, zero_prior=False):
    """Noise-mode pass of the feature branch: rate, distortion, f_hat."""
    fc = models.feature
    y = fc.analyze(feature)
    y_noisy = quantize_node(y, noise)
    prior = fc.prior_map(codes_hat)
    if zero_prior:
        prior = ad.const(np.zeros_like(prior.value))
    rate = None
    decoded = []
    for i, (a, b) in enumerate(fc.slice_bounds()):
        mu, sigma = fc.context_params(prior, decoded, i)
        y_i = ad.channel_slice(y_noisy, a, b)
        term = rate_bits_node(gaussian_bin_prob_node(mu, sigma, y_i))
        rate = term if rate is None else ad.add(rate, term)
        decoded.append(y_i)
    f_hat = fc.synthesize(y_noisy)
    dist = ad.sum_all(ad.square(ad.sub(f_hat, feature)))
    return rate, dist, f_hat


# ---------------------------------------------------------------------------
# optimizer and loop


class MomentumSGD:
    """Stochastic gradient with heavy-ball momentum and global-norm clipping."""

    def __init__(self, parameters, lr, momentum=0.95, clip_norm=None):
        self.parameters = list(parameters)
        self.lr = lr
        self.momentum = momentum
        self.clip_norm = clip_norm
        self._velocity = {id(p): np.zeros_like(p.value) for p in self.parameters}

    def step(self, grads):
        scale = 1.0
        if self.clip_norm is not None:
            sq = 0.0
            for p in self.parameters:
                g = grads.get(id(p))
                if g is not None:
                    sq += float((g * g).sum())
            norm = np.sqrt(sq)
            if norm > self.clip_norm:
                scale = self.clip_norm / norm
        for p in self.parameters:
            g = grads.get(id(p))
            if g is None:
                continue
            v = self._velocity[id(p)]
            v *= self.momentum
            v += g * scale
            p.value = p.value - self.lr * v


@dataclass
class TrainLog:
    columns = ("step", "stage", "total", "mse", "mlpips", "fsc",
               "rate_s", "dist_s", "rate_f", "dist_f")
    rows: list = field(default_factory=list)

    def append(self, step, stage, total, **terms):
        row = [step, stage, total]
        for name in self.columns[3:]:
            row.append(terms.get(name, 0.0))
        self.rows.append(row)

    def stage_rows(self, stage):
        return [r for r in self.rows if r[1] == stage]

    def stage_window_means(self, stage, frac=0.1):
        """(mean of first frac, mean of last frac) of a stage's total loss."""
        rows = self.stage_rows(stage)
        n = max(1, int(len(rows) * frac))
        head = float(np.mean([r[2] for r in rows[:n]]))
        tail = float(np.mean([r[2] for r in rows[-n:]]))
        return head, tail

    def to_csv(self):
        out = io.StringIO()
        out.write(",".join(self.columns) + "\n")
        for row in self.rows:
            cells = [str(row[0]), row[1]] + [repr(float(v)) for v in row[2:]]
            out.write(",".join(cells) + "\n")
        return out.getvalue()


def _batches(n, batch_size, steps, rng):
    """Deterministic batch index stream: reshuffle each epoch."""
    order = rng.permutation(n)
    pos = 0
    for _ in range(steps):
        if pos + batch_size > n:
            order = rng.permutation(n)
            pos = 0
        yield order[pos:pos + batch_size]
        pos += batch_size


def _check_finite(value, step):
    if not np.isfinite(value):
        raise TrainingDiverged(step)
    return float(value)


def train(models, schedule, weights, dataset, extractor, log=None):
    """Run the three stages in order; returns the loss log.

    The generator never trains. Stage 2 touches only the codec branches
    (inversion frozen); stage 3 unfreezes inversion again.
    """
    log = log or TrainLog()
    cfg = models.config
    t = cfg.split_t
    images = np.asarray(dataset.images, dtype=np.float64)
    n = images.shape[0]
    step = 0

    # ---- stage 1: inversion warm-up ----------------------------------
    rng = Rng(schedule.seed, stream_id=1)
    opt = MomentumSGD(models.inversion.params().values(),
                      schedule.lr, schedule.momentum, schedule.grad_clip)
    for idx in _batches(n, schedule.batch_size, schedule.steps_inversion, rng):
        x = ad.const(images[idx])
        with Tape() as tape:
            codes, feat = models.inversion(x)
            late = ad.channel_slice(codes, t, cfg.n_codes)
            early = ad.channel_slice(codes, 0, t)
            x_hat = models.generator.run_late(late, feat, t)
            total, terms = loss_inversion(x_hat, x, feat, early,
                                          models.generator, t, extractor,
                                          weights)
        ad.backward(total)
        opt.step(tape.grads())
        log.append(step, "inversion", _check_finite(total.value, step),
                   mse=terms["mse"].value, mlpips=terms["mlpips"].value,
                   fsc=terms["fsc"].value)
        step += 1

    # ---- stage 2: rate-distortion on frozen (codes, feature) pairs ----
    rng = Rng(schedule.seed, stream_id=2)
    noise_rng = Rng(schedule.seed, stream_id=3)
    codes_all, feats_all = inversion_outputs(models, images)
    opt = MomentumSGD(list(models.semantic.params().values())
                      + list(models.feature.params().values()),
                      schedule.lr, schedule.momentum, schedule.grad_clip)
    for idx in _batches(n, schedule.batch_size, schedule.steps_rd, rng):
        codes = ad.const(codes_all[idx])
        feat = ad.const(feats_all[idx])
        noise_s = noise_rng.uniform_noise((len(idx), cfg.semantic_dim))
        noise_y = noise_rng.uniform_noise((len(idx), cfg.y_channels,
                                           cfg.feature_res, cfg.feature_res))
        with Tape() as tape:
            rate_s, dist_s, codes_hat = semantic_rd_terms(models, codes, noise_s)
            rate_f, dist_f, _ = feature_rd_terms(models, feat, codes_hat, noise_y)
            total = _rd_total(rate_s, dist_s, rate_f, dist_f, weights, len(idx))
        ad.backward(total)
        opt.step(tape.grads())
        log.append(step, "rd", _check_finite(total.value, step),
                   rate_s=rate_s.value / len(idx), dist_s=dist_s.value / len(idx),
                   rate_f=rate_f.value / len(idx), dist_f=dist_f.value / len(idx))
        step += 1

    # ---- stage 3: joint fine-tune (generator still frozen) ------------
    rng = Rng(schedule.seed, stream_id=4)
    noise_rng = Rng(schedule.seed, stream_id=5)
    opt = MomentumSGD(list(models.inversion.params().values())
                      + list(models.semantic.params().values())
                      + list(models.feature.params().values()),
                      schedule.lr, schedule.momentum, schedule.grad_clip)
    for idx in _batches(n, schedule.batch_size, schedule.steps_joint, rng):
        x = ad.const(images[idx])
        noise_s = noise_rng.uniform_noise((len(idx), cfg.semantic_dim))
        noise_y = noise_rng.uniform_noise((len(idx), cfg.y_channels,
                                           cfg.feature_res, cfg.feature_res))
        with Tape() as tape:
            codes, feat = models.inversion(x)
            rate_s, dist_s, codes_hat = semantic_rd_terms(models, codes, noise_s)
            rate_f, dist_f, f_hat = feature_rd_terms(models, feat, codes_hat,
                                                     noise_y)
            late_hat = ad.channel_slice(codes_hat, t, cfg.n_codes)
            x_hat = models.generator.run_late(late_hat, f_hat, t)
            early = ad.channel_slice(codes, 0, t)
            inv_total, terms = loss_inversion(x_hat, x, feat, early,
                                              models.generator, t, extractor,
                                              weights)
            total = ad.add(_rd_total(rate_s, dist_s, rate_f, dist_f, weights,
                                     len(idx)),
                           ad.scale(inv_total, weights.inversion))
        ad.backward(total)
        opt.step(tape.grads())
        log.append(step, "joint", _check_finite(total.value, step),
                   mse=terms["mse"].value, mlpips=terms["mlpips"].value,
                   fsc=terms["fsc"].value,
                   rate_s=rate_s.value / len(idx), dist_s=dist_s.value / len(idx),
                   rate_f=rate_f.value / len(idx), dist_f=dist_f.value / len(idx))
        step += 1

    models.finalize_storage()
    return log


def _rd_total(rate_s, dist_s, rate_f, dist_f, weights, batch):
    scn = ad.add(rate_s, ad.scale(dist_s, weights.semantic_distortion))
    fcn = ad.add(rate_f, ad.scale(dist_f, weights.feature_distortion))
    return ad.scale(ad.add(scn, fcn), 1.0 / batch)


def inversion_outputs(models, images, batch=32):
    """Run the inversion encoder over a dataset without gradients."""
    codes_list, feat_list = [], []
    for start in range(0, images.shape[0], batch):
        chunk = ad.const(images[start:start + batch])
        codes, feat = models.inversion(chunk)
        codes_list.append(codes.value)
        feat_list.append(feat.value)
    return np.concatenate(codes_list), np.concatenate(feat_list)
