"""Semantic editing and style mixing on decoded compressed representations.

Edits never touch coded bits: a direction shifts every decoded style code,
the matching feature offset is the difference of two early-generator passes,
and the late generator resynthesizes. Directions for the toy generator come
from a PCA over sampled style vectors.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import params as par
from .codec import SemanticSplit, decode_latents, split_codes
from .errors import ContainerError, ShapeError


@dataclass(frozen=True)
class EditDirection:
    """A shift in style-code space; ``magnitude`` scales ``delta``."""

    delta: np.ndarray
    magnitude: float = 1.0
    name: str = ""

    def __post_init__(self):
        d = np.asarray(self.delta, dtype=np.float64)
        object.__setattr__(self, "delta", d)
        if d.ndim != 1 or not np.all(np.isfinite(d)):
            raise ShapeError(f"direction must be a finite vector, got {d.shape}")

    def effective(self):
        return self.delta * float(self.magnitude)


def apply_direction(split, direction, code_mask=None):
    """Add the direction to every code of both partitions.

    ``code_mask`` optionally scales the shift per code index (length m);
    by default every code receives the same shift.
    """
    delta = direction.effective()
    if delta.shape[0] != split.early.shape[1]:
        raise ShapeError(f"direction dim {delta.shape[0]} != style dim "
                         f"{split.early.shape[1]}")
    m = split.early.shape[0] + split.late.shape[0]
    if code_mask is None:
        mask = np.ones(m)
    else:
        mask = np.asarray(code_mask, dtype=np.float64)
        if mask.shape != (m,):
            raise ShapeError(f"code mask shape {mask.shape}, want ({m},)")
    t = split.t
    early = split.early + mask[:t, None] * delta[None, :]
    late = split.late + mask[t:, None] * delta[None, :]
    return SemanticSplit(early, late, t)


def feature_delta(early_codes, edited_early_codes, generator, t):
    """Feature-space offset induced by editing the early codes."""
    a = generator.run_early(ad.const(np.asarray(early_codes)[None]), t).value[0]
    b = generator.run_early(ad.const(np.asarray(edited_early_codes)[None]), t).value[0]
    return b - a


def edit_image(data, direction, models, code_mask=None):
    """Decode a bitstream, apply a semantic edit, resynthesize the image."""
    header, codes_hat, y_hat = decode_latents(data, models)
    t = header.split_t
    split = split_codes(codes_hat.value[0], t)
    edited = apply_direction(split, direction, code_mask)
    if header.semantics_only:
        codes = np.concatenate([edited.early, edited.late])[None]
        return models.generator.synthesize(ad.const(codes)).value[0]
    feat_hat = models.feature.synthesize(ad.const(y_hat)).value[0]
    delta_f = feature_delta(split.early, edited.early, models.generator, t)
    out = models.generator.run_late(ad.const(edited.late[None]),
                                    ad.const((feat_hat + delta_f)[None]), t)
    return out.value[0]


def style_mix(style_data, content_data, models):
    """Late codes from the style stream, mid feature from the content stream."""
    style_header, style_codes, _ = decode_latents(style_data, models)
    content_header, _, content_y = decode_latents(content_data, models)
    if style_header.model_hash != content_header.model_hash:
        raise ContainerError("style and content streams were produced with "
                             "different models")
    if content_y is None:
        raise ContainerError("content stream is semantics-only: it carries "
                             "no mid-level feature to mix")
    t = content_header.split_t
    feat = models.feature.synthesize(ad.const(content_y))
    late = ad.const(style_codes.value[:, t:])
    return models.generator.run_late(late, feat, t).value[0]


def principal_directions(generator, rng, n_samples=512, count=4):
    """PCA over sampled style vectors; one direction per leading component.

    Each direction is the unit eigenvector scaled by one standard deviation
    along it, so magnitude 1.0 is a one-sigma edit.
    """
    z = rng.normal((n_samples, generator.config.latent_dim))
    w = generator.map_latent(ad.const(z)).value
    centered = w - w.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / n_samples
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    dirs = []
    for rank, i in enumerate(order[:count]):
        scale = float(np.sqrt(max(eigvals[i], 0.0)))
        vec = eigvecs[:, i] * scale
        if vec[np.argmax(np.abs(vec))] < 0:  # deterministic sign convention
            vec = -vec
        dirs.append(EditDirection(vec, 1.0, f"pc{rank}"))
    return dirs


def save_directions(path, directions):
    par.save_arrays(path, {d.name: d.delta for d in directions})


def load_directions(path_or_bytes):
    if isinstance(path_or_bytes, (bytes, bytearray)):
        arrays = par.load_arrays(bytes(path_or_bytes))
    else:
        arrays = par.read_arrays(path_or_bytes)
    return [EditDirection(v, 1.0, k) for k, v in arrays.items()]
