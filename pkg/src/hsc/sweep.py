"""Rate-distortion sweeps: train per lambda, encode, measure, emit CSV/plot."""

import io
from dataclasses import dataclass, field

import numpy as np

from . import config as cfgmod
from .codec import CodecModels, decode_image, encode_image
from .errors import MetricError
from .generator import sample_dataset
from .metrics import (FixedFeatureExtractor, RDCurve, RDPoint, bd_metric, bpp,
                      distortion_suite)
from .numerics import Rng
from .training import LossWeights, ToyDataset, TrainSchedule, train

_METRICS = ("mse", "psnr", "toy-perceptual", "toy-frechet")


@dataclass
class SweepConfig:
    seed: int = 11
    train_size: int = 192
    eval_size: int = 16
    noise_std: float = 0.01
    steps_inversion: int = 1200
    steps_rd: int = 1200
    steps_joint: int = 0
    batch_size: int = 8
    lr: float = 1e-4
    momentum: float = 0.95
    perceptual: float = 0.8
    consistency: float = 1.0
    semantic_distortion: float = 4.0
    feature_distortion_list: tuple = (2.0, 4.0, 8.0, 16.0)
    semantics_only: bool = False
    out_csv: str = ""
    out_plot: str = ""
    reference_csv: str = ""
    bd_metric_name: str = "toy-perceptual"

    @classmethod
    def from_file(cls, path):
        raw = cfgmod.read_config(path)
        base = cls()
        return cls(
            seed=cfgmod.get_int(raw, "seed", base.seed),
            train_size=cfgmod.get_int(raw, "train_size", base.train_size),
            eval_size=cfgmod.get_int(raw, "eval_size", base.eval_size),
            noise_std=cfgmod.get_float(raw, "noise_std", base.noise_std),
            steps_inversion=cfgmod.get_int(raw, "steps_inversion",
                                           base.steps_inversion),
            steps_rd=cfgmod.get_int(raw, "steps_rd", base.steps_rd),
            steps_joint=cfgmod.get_int(raw, "steps_joint", base.steps_joint),
            batch_size=cfgmod.get_int(raw, "batch_size", base.batch_size),
            lr=cfgmod.get_float(raw, "lr", base.lr),
            momentum=cfgmod.get_float(raw, "momentum", base.momentum),
            perceptual=cfgmod.get_float(raw, "lambda1", base.perceptual),
            consistency=cfgmod.get_float(raw, "lambda2", base.consistency),
            semantic_distortion=cfgmod.get_float(raw, "lambda3",
                                                 base.semantic_distortion),
            feature_distortion_list=tuple(cfgmod.get_float_list(
                raw, "lambda4_list", base.feature_distortion_list)),
            out_csv=cfgmod.get_str(raw, "out_csv", base.out_csv),
            out_plot=cfgmod.get_str(raw, "out_plot", base.out_plot),
            reference_csv=cfgmod.get_str(raw, "reference_csv",
                                         base.reference_csv),
            bd_metric_name=cfgmod.get_str(raw, "bd_metric",
                                          base.bd_metric_name),
        )


@dataclass
class SweepResult:
    lambdas: list
    points: list                      # RDPoint per lambda, in lambda order
    csv_text: str
    curve: RDCurve | None = None      # None if bpp is not strictly increasing
    curve_error: str = ""
    bd_values: dict = field(default_factory=dict)
    logs: list = field(default_factory=list)


def _dataset(cfg):
    models_seed_gen = CodecModels.build(seed=cfg.seed).generator
    rng = Rng(cfg.seed, stream_id=50)
    images, codes = sample_dataset(models_seed_gen,
                                   cfg.train_size + cfg.eval_size, rng,
                                   noise_std=cfg.noise_std)
    train_set = ToyDataset(images[:cfg.train_size], codes[:cfg.train_size])
    eval_images = images[cfg.train_size:]
    return train_set, eval_images


def _copy_params(src, dst):
    s, d = src.params(), dst.params()
    for name, p in s.items():
        d[name].value = p.value.copy()


def evaluate_models(models, eval_images, extractor, semantics_only=False):
    """Encode/decode a held-out set; returns (mean bpp, metric map)."""
    recon = []
    bpps = []
    dims = (models.config.img_res, models.config.img_res)
    for img in eval_images:
        enc = encode_image(img, models, semantics_only=semantics_only)
        dec = decode_image(enc.data, models)
        recon.append(dec.image)
        bpps.append(bpp(enc.data, dims))
    metrics = distortion_suite(eval_images, np.stack(recon), extractor)
    return float(np.mean(bpps)), metrics


def rd_sweep(cfg, progress=None):
    """One RD point per feature-distortion weight, sharing one warm-up."""
    train_set, eval_images = _dataset(cfg)
    extractor = FixedFeatureExtractor()

    base = CodecModels.build(seed=cfg.seed)
    warmup = TrainSchedule(steps_inversion=cfg.steps_inversion, steps_rd=0,
                           steps_joint=0, lr=cfg.lr, momentum=cfg.momentum,
                           batch_size=cfg.batch_size, seed=cfg.seed)
    weights0 = LossWeights(cfg.perceptual, cfg.consistency,
                           cfg.semantic_distortion,
                           cfg.feature_distortion_list[0], 1.0)
    train(base, warmup, weights0, train_set, extractor)

    points = []
    logs = []
    for lam in cfg.feature_distortion_list:
        if progress:
            progress(f"training rd stage for lambda4={lam}")
        models = CodecModels.build(seed=cfg.seed)
        _copy_params(base, models)
        schedule = TrainSchedule(steps_inversion=0, steps_rd=cfg.steps_rd,
                                 steps_joint=cfg.steps_joint, lr=cfg.lr,
                                 momentum=cfg.momentum,
                                 batch_size=cfg.batch_size, seed=cfg.seed)
        weights = LossWeights(cfg.perceptual, cfg.consistency,
                              cfg.semantic_distortion, lam, 1.0)
        logs.append(train(models, schedule, weights, train_set, extractor))
        mean_bpp, metrics = evaluate_models(models, eval_images, extractor,
                                            cfg.semantics_only)
        points.append(RDPoint(mean_bpp, metrics))

    csv_text = _points_csv(cfg.feature_distortion_list, points)
    curve = None
    curve_error = ""
    try:
        curve = RDCurve(points)
    except MetricError as e:
        curve_error = str(e)

    result = SweepResult(list(cfg.feature_distortion_list), points, csv_text,
                         curve, curve_error, logs=logs)
    if cfg.reference_csv and curve is not None:
        ref = curve_from_csv_file(cfg.reference_csv)
        for name in _METRICS:
            result.bd_values[name] = bd_metric(ref, curve, name)
    return result


def _points_csv(lambdas, points):
    out = io.StringIO()
    out.write("lambda,bpp," + ",".join(_METRICS) + "\n")
    for lam, p in zip(lambdas, points):
        cells = [repr(float(lam)), repr(float(p.bpp))]
        cells += [repr(float(p.distortion[m])) for m in _METRICS]
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def curve_from_csv(text):
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    header = lines[0].split(",")
    points = []
    for ln in lines[1:]:
        cells = ln.split(",")
        row = dict(zip(header, cells))
        dist = {m: float(row[m]) for m in _METRICS if m in row}
        points.append(RDPoint(float(row["bpp"]), dist))
    return RDCurve(points)


def curve_from_csv_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return curve_from_csv(fh.read())


def plot_curve(points, path, metric="toy-perceptual"):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    xs = [p.bpp for p in points]
    ys = [p.distortion[metric] for p in points]
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel("bpp")
    ax.set_ylabel(metric)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
