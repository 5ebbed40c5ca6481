"""The codec proper: two-stream compression of (style codes, mid feature).

The semantic branch maps the style codes through a small autoencoder to a
latent coded under the learned factorized density. The feature branch
transforms the mid-level feature, splits it into channel slices and codes
each slice under a conditional Gaussian whose parameters come from the
decoded semantics plus all previously decoded slices (strictly in order, so
the decoder can mirror the prediction).
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import params as par
from .container import (FLAG_SEMANTICS_ONLY, HscHeader, read_container,
                        write_container)
from .entropy_models import (FactorizedDensity, gaussian_bin_prob,
                             gaussian_pmf_range, rate_bits, round_half_away)
from .errors import CoderError, ContainerError, ShapeError
from .generator import GeneratorConfig, ToyGenerator
from .inversion import InversionEncoder
from .layers import Conv2d, Linear
from .numerics import Rng
from .range_coder import (SYMBOL_HI, SYMBOL_LO, build_cdf_batch,
                          decode_symbols, encode_symbols)


@dataclass(frozen=True)
class CodecConfig:
    n_codes: int = 8
    style_dim: int = 8
    split_t: int = 3
    feature_channels: int = 16
    y_channels: int = 32
    n_slices: int = 8
    semantic_dim: int = 32
    prior_channels: int = 8
    img_res: int = 32
    img_channels: int = 3

    def generator_config(self):
        return GeneratorConfig(style_dim=self.style_dim, n_codes=self.n_codes,
                               channels=self.feature_channels,
                               img_channels=self.img_channels)

    @property
    def feature_res(self):
        return self.generator_config().feature_res(self.split_t)

    def slice_channels(self):
        """Equal channel shares; remainder channels go to the last slice."""
        base = self.y_channels // self.n_slices
        sizes = [base] * self.n_slices
        sizes[-1] += self.y_channels - base * self.n_slices
        return sizes

    def to_arrays(self):
        names = ("n_codes", "style_dim", "split_t", "feature_channels",
                 "y_channels", "n_slices", "semantic_dim", "prior_channels",
                 "img_res", "img_channels")
        return {f"cfg.{k}": np.array([float(getattr(self, k))]) for k in names}

    @classmethod
    def from_arrays(cls, arrays):
        kwargs = {}
        for key, val in arrays.items():
            if key.startswith("cfg."):
                kwargs[key[4:]] = int(val[0])
        return cls(**kwargs)


@dataclass(frozen=True)
class StyleCodes:
    """The m core-semantic vectors of one image, shape (m, style_dim)."""

    codes: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.codes, dtype=np.float64)
        object.__setattr__(self, "codes", c)
        if c.ndim != 2:
            raise ShapeError(f"style codes must be (m, d), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ShapeError("style codes contain non-finite entries")


@dataclass(frozen=True)
class SemanticSplit:
    """Codes split at index t: early codes drive editing, late ones detail."""

    early: np.ndarray  # (t, d)
    late: np.ndarray   # (m - t, d)
    t: int


def split_codes(codes, t):
    codes = np.asarray(codes, dtype=np.float64)
    m = codes.shape[0]
    if not 1 <= t < m:
        raise ShapeError(f"split index {t} outside [1, {m - 1}]")
    return SemanticSplit(codes[:t].copy(), codes[t:].copy(), t)


class SemanticCodec:
    """Core-semantics branch: code autoencoder plus factorized density."""

    def __init__(self, rng, n_codes, style_dim, semantic_dim, hidden=48):
        flat = n_codes * style_dim
        self.n_codes = n_codes
        self.style_dim = style_dim
        self.semantic_dim = semantic_dim
        self.enc1 = Linear(rng, flat, hidden, gain=1.0)
        self.enc2 = Linear(rng, hidden, semantic_dim, gain=1.0)
        self.dec1 = Linear(rng, semantic_dim, hidden, gain=1.0)
        self.dec2 = Linear(rng, hidden, flat, gain=1.0)
        self.density = FactorizedDensity(semantic_dim, rng=rng)

    def params(self):
        out = {}
        out.update(self.enc1.params("semantic.enc1"))
        out.update(self.enc2.params("semantic.enc2"))
        out.update(self.dec1.params("semantic.dec1"))
        out.update(self.dec2.params("semantic.dec2"))
        out.update(self.density.params("semantic.density"))
        return out

    def analyze(self, codes):
        """(N, m, d) codes -> (N, semantic_dim) latent."""
        n = codes.value.shape[0]
        flat = ad.reshape(codes, (n, self.n_codes * self.style_dim))
        return self.enc2(ad.tanh(self.enc1(flat)))

    def synthesize_codes(self, latent):
        """(N, semantic_dim) quantized latent -> (N, m, d) decoded codes."""
        n = latent.value.shape[0]
        flat = self.dec2(ad.tanh(self.dec1(latent)))
        return ad.reshape(flat, (n, self.n_codes, self.style_dim))


class FeatureCodec:
    """Feature branch: feature autoencoder plus slice-wise Gaussian context."""

    def __init__(self, rng, config):
        c = config
        self.config = c
        self.enc1 = Conv2d(rng, c.feature_channels, c.y_channels, 3, gain=1.0)
        self.enc2 = Conv2d(rng, c.y_channels, c.y_channels, 3, gain=0.7)
        self.dec1 = Conv2d(rng, c.y_channels, c.y_channels, 3, gain=1.0)
        self.dec2 = Conv2d(rng, c.y_channels, c.feature_channels, 3, gain=0.7)
        self.prior = Linear(rng, c.n_codes * c.style_dim, c.prior_channels,
                            gain=1.0)
        self.slice_sizes = c.slice_channels()
        self.ctx = []
        in_ch = c.prior_channels
        for size in self.slice_sizes:
            blk = (Conv2d(rng, in_ch, 16, 3, gain=1.0),
                   Conv2d(rng, 16, 2 * size, 3, gain=0.5))
            self.ctx.append(blk)
            in_ch += size

    def params(self):
        out = {}
        out.update(self.enc1.params("feature.enc1"))
        out.update(self.enc2.params("feature.enc2"))
        out.update(self.dec1.params("feature.dec1"))
        out.update(self.dec2.params("feature.dec2"))
        out.update(self.prior.params("feature.prior"))
        for i, (c1, c2) in enumerate(self.ctx):
            out.update(c1.params(f"feature.ctx{i}a"))
            out.update(c2.params(f"feature.ctx{i}b"))
        return out

    def analyze(self, feature):
        return self.enc2(ad.tanh(self.enc1(feature)))

    def synthesize(self, y_hat):
        return self.dec2(ad.tanh(self.dec1(y_hat)))

    def prior_map(self, codes_hat):
        """Decoded codes -> (N, prior_channels, h, w) spatial prior."""
        n = codes_hat.value.shape[0]
        c = self.config
        flat = ad.reshape(codes_hat, (n, c.n_codes * c.style_dim))
        vec = ad.tanh(self.prior(flat))
        return ad.spatial_broadcast(vec, c.feature_res, c.feature_res)

    def context_params(self, prior_node, decoded_slices, index):
        """Gaussian (mu, sigma) for slice ``index``.

        Conditioning is the spatial prior concatenated with all previously
        decoded slices; slice 0 therefore sees the semantics alone.
        """
        inputs = [prior_node] + list(decoded_slices[:index])
        h = ad.concat(inputs, axis=1) if len(inputs) > 1 else inputs[0]
        c1, c2 = self.ctx[index]
        out = c2(ad.tanh(c1(h)))
        size = self.slice_sizes[index]
        mu = ad.channel_slice(out, 0, size)
        sigma = ad.softplus(ad.channel_slice(out, size, 2 * size))
        return mu, sigma

    def slice_bounds(self):
        edges = np.concatenate([[0], np.cumsum(self.slice_sizes)])
        return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


class CodecModels:
    """Bundle of generator, inversion encoder and the two codec branches."""

    def __init__(self, config, seed):
        self.config = config
        self.seed = seed
        self.generator = ToyGenerator(config.generator_config(), seed=seed)
        rng = Rng(seed, stream_id=20)
        self.inversion = InversionEncoder(
            rng, config.img_res, config.img_channels, config.feature_res,
            config.feature_channels, config.n_codes, config.style_dim,
            width=config.feature_channels)
        self.semantic = SemanticCodec(Rng(seed, stream_id=21), config.n_codes,
                                      config.style_dim, config.semantic_dim)
        self.feature = FeatureCodec(Rng(seed, stream_id=22), config)

    @classmethod
    def build(cls, config=None, seed=0):
        return cls(config or CodecConfig(), seed)

    def params(self):
        out = {}
        out.update(self.generator.params())
        out.update(self.inversion.params())
        out.update(self.semantic.params())
        out.update(self.feature.params())
        return out

    def named_arrays(self):
        arrays = dict(self.config.to_arrays())
        for name, p in self.params().items():
            arrays[name] = p.value
        return arrays

    def content_hash(self):
        return par.content_hash(self.named_arrays())

    def serialize(self):
        return par.dump_arrays(self.named_arrays())

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.serialize())

    @classmethod
    def load(cls, path_or_bytes):
        if isinstance(path_or_bytes, (bytes, bytearray)):
            arrays = par.load_arrays(bytes(path_or_bytes))
        else:
            arrays = par.read_arrays(path_or_bytes)
        config = CodecConfig.from_arrays(arrays)
        models = cls(config, seed=0)
        own = models.params()
        for name, p in own.items():
            if name not in arrays:
                raise ContainerError(f"model file missing parameter {name!r}")
            if arrays[name].shape != p.value.shape:
                raise ContainerError(f"model parameter {name!r} has shape "
                                     f"{arrays[name].shape}, want {p.value.shape}")
            p.value = arrays[name]
        return models

    def finalize_storage(self):
        """Round every parameter to its stored 32-bit value.

        Called after training so that a model in memory and its saved file
        drive the entropy coder identically.
        """
        for p in self.params().values():
            p.value = p.value.astype(np.float32).astype(np.float64)


# ---------------------------------------------------------------------------
# encode / decode


@dataclass
class EncodeResult:
    data: bytes
    est_bits_semantic: float
    est_bits_feature: float
    stats: dict = field(default_factory=dict)

    @property
    def payload_bits(self):
        return self.stats["payload_bits"]


@dataclass
class DecodeResult:
    image: np.ndarray           # (3, R, R) in [0, 1]
    codes: StyleCodes
    feature: np.ndarray | None  # decoded mid-level feature, None if absent
    header: HscHeader
    y_hat: np.ndarray | None


def _check_image(x, config):
    x = np.asarray(x, dtype=np.float64)
    want = (config.img_channels, config.img_res, config.img_res)
    if x.shape != want:
        raise ShapeError(f"image shape {x.shape}, want {want}")
    return x


def _semantic_table(models):
    pmf, tail = models.semantic.density.pmf_range(SYMBOL_LO, SYMBOL_HI)
    return build_cdf_batch(pmf, SYMBOL_LO, tail)


def encode_semantics(codes, models):
    """Style codes (m, d) -> (quantized latent, coded chunk, estimated bits)."""
    codes = np.asarray(codes, dtype=np.float64)
    s_lat = models.semantic.analyze(ad.const(codes[None])).value[0]
    s_q = round_half_away(s_lat)
    est = rate_bits(models.semantic.density.bin_probs(s_q[None]))
    chunk = encode_symbols(s_q.astype(np.int64), _semantic_table(models))
    return s_q, chunk, est


def decode_semantics(chunk, models):
    """Coded chunk -> (quantized latent, decoded codes node (1, m, d))."""
    s_q = decode_symbols(chunk, _semantic_table(models),
                         models.config.semantic_dim).astype(np.float64)
    return s_q, models.semantic.synthesize_codes(ad.const(s_q[None]))


def encode_feature(feature, codes_hat, models):
    """Mid feature (1, C, h, w) node/array + decoded codes -> slice chunks.

    Returns (chunks, estimated bits, quantized y). Conditioning uses the
    decoded semantics and previously quantized slices, mirroring the decoder.
    """
    feat_node = feature if isinstance(feature, ad.Node) else ad.const(feature)
    y = models.feature.analyze(feat_node).value
    prior = models.feature.prior_map(codes_hat)
    chunks = []
    est = 0.0
    decoded = []
    for i, (a, b) in enumerate(models.feature.slice_bounds()):
        mu, sigma = models.feature.context_params(prior, decoded, i)
        y_i = round_half_away(y[:, a:b])
        est += rate_bits(gaussian_bin_prob(mu.value, sigma.value, y_i))
        pmf, tail = gaussian_pmf_range(mu.value, sigma.value,
                                       SYMBOL_LO, SYMBOL_HI)
        tbl = build_cdf_batch(pmf, SYMBOL_LO, tail)
        chunks.append(encode_symbols(y_i.ravel().astype(np.int64), tbl))
        decoded.append(ad.const(y_i))
    y_q = np.concatenate([n.value for n in decoded], axis=1)
    return chunks, est, y_q


def decode_feature(chunks, codes_hat, models):
    """Slice chunks + decoded codes -> quantized y (1, C_y, h, w)."""
    dec = SliceDecoder(models, codes_hat)
    for i, payload in enumerate(chunks):
        dec.decode_slice(i, payload)
    return dec.assemble()


def encode_image(x, models, semantics_only=False):
    """Compress one image into container bytes plus rate diagnostics."""
    cfg = models.config
    x = _check_image(x, cfg)
    codes, feat = models.inversion(ad.const(x[None]))

    s_q, chunk0, est_s = encode_semantics(codes.value[0], models)
    chunks = [chunk0]
    codes_hat = models.semantic.synthesize_codes(ad.const(s_q[None]))

    est_f = 0.0
    if not semantics_only:
        fchunks, est_f, _ = encode_feature(feat, codes_hat, models)
        chunks.extend(fchunks)

    flags = FLAG_SEMANTICS_ONLY if semantics_only else 0
    header = HscHeader(flags, cfg.n_codes, cfg.split_t, cfg.n_slices,
                       cfg.style_dim, cfg.feature_channels, cfg.feature_res,
                       cfg.feature_res, cfg.semantic_dim,
                       models.content_hash())
    data = write_container(header, chunks)
    payload_bits = 8 * sum(len(c) for c in chunks)
    return EncodeResult(data, est_s, est_f, {
        "payload_bits": payload_bits,
        "container_bytes": len(data),
        "chunk_bytes": [len(c) for c in chunks],
        "semantics_only": semantics_only,
    })


def _check_header(header, models):
    cfg = models.config
    fields = (("n_codes", header.n_codes, cfg.n_codes),
              ("split_t", header.split_t, cfg.split_t),
              ("style_dim", header.style_dim, cfg.style_dim),
              ("feature_channels", header.feature_channels, cfg.feature_channels),
              ("feature_h", header.feature_h, cfg.feature_res),
              ("feature_w", header.feature_w, cfg.feature_res),
              ("semantic_len", header.semantic_len, cfg.semantic_dim))
    if not header.semantics_only:
        fields += (("n_slices", header.n_slices, cfg.n_slices),)
    for name, got, want in fields:
        if got != want:
            raise ContainerError(f"header {name}={got} does not match the "
                                 f"loaded model ({want})")
    if header.model_hash != models.content_hash():
        raise ContainerError("container model hash does not match the "
                             "loaded parameters")


class SliceDecoder:
    """Decodes feature slices strictly in order 0..k-1."""

    def __init__(self, models, codes_hat):
        self._models = models
        self._prior = models.feature.prior_map(codes_hat)
        self._decoded = []
        self._next = 0

    def decode_slice(self, index, payload):
        if index != self._next:
            raise CoderError(f"slice {index} requested before slice "
                             f"{self._next} was decoded")
        fc = self._models.feature
        a, b = fc.slice_bounds()[index]
        res = fc.config.feature_res
        mu, sigma = fc.context_params(self._prior, self._decoded, index)
        pmf, tail = gaussian_pmf_range(mu.value, sigma.value,
                                       SYMBOL_LO, SYMBOL_HI)
        table = build_cdf_batch(pmf, SYMBOL_LO, tail)
        n_sym = (b - a) * res * res
        vals = decode_symbols(payload, table, n_sym).astype(np.float64)
        y_i = vals.reshape(1, b - a, res, res)
        self._decoded.append(ad.const(y_i))
        self._next += 1
        return y_i

    def assemble(self):
        if self._next != len(self._models.feature.slice_sizes):
            raise CoderError(f"only {self._next} of "
                             f"{len(self._models.feature.slice_sizes)} slices decoded")
        return np.concatenate([n.value for n in self._decoded], axis=1)


def decode_latents(data, models):
    """Container bytes -> (header, decoded codes (m, d), y_hat or None)."""
    header, chunks = read_container(data)
    _check_header(header, models)
    _, codes_hat = decode_semantics(chunks[0], models)
    y_hat = None
    if not header.semantics_only:
        y_hat = decode_feature(chunks[1:], codes_hat, models)
    return header, codes_hat, y_hat


def decode_image(data, models):
    """Decompress container bytes to an image (deterministic)."""
    header, codes_hat, y_hat = decode_latents(data, models)
    if header.semantics_only:
        img = models.generator.synthesize(codes_hat).value[0]
        feat_val = None
    else:
        feat = models.feature.synthesize(ad.const(y_hat))
        t = models.config.split_t
        late = ad.const(codes_hat.value[:, t:])
        img = models.generator.run_late(late, feat, t).value[0]
        feat_val = feat.value[0]
    return DecodeResult(img, StyleCodes(codes_hat.value[0]), feat_val,
                        header, None if y_hat is None else y_hat[0])
