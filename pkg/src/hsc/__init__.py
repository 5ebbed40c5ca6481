"""Hierarchical semantic codec at desk scale.

Two-stream compression of a toy generator's latent space: core style codes
under a learned factorized density, and the mid-level feature under a
slice-wise conditional Gaussian context shared with the decoded semantics.
Produces real decodable bitstreams and supports semantic editing and style
mixing directly on them.
"""

from .backend import backend_name
from .codec import (CodecConfig, CodecModels, DecodeResult, EncodeResult,
                    SemanticSplit, StyleCodes, decode_image, encode_image,
                    split_codes)
from .editing import (EditDirection, apply_direction, edit_image,
                      feature_delta, principal_directions, style_mix)
from .errors import (CoderError, ConfigError, ContainerError,
                     DistributionError, HscError, MetricError, ShapeError,
                     TrainingDiverged)
from .metrics import RDCurve, RDPoint, bd_metric, bpp, distortion_suite
from .numerics import Rng, std_normal_cdf, uniform_noise
from .training import LossWeights, ToyDataset, TrainSchedule, train

__version__ = "0.1.0"

__all__ = [
    "CodecConfig", "CodecModels", "DecodeResult", "EncodeResult",
    "SemanticSplit", "StyleCodes", "decode_image", "encode_image",
    "split_codes", "EditDirection", "apply_direction", "edit_image",
    "feature_delta", "principal_directions", "style_mix", "RDCurve",
    "RDPoint", "bd_metric", "bpp", "distortion_suite", "Rng",
    "std_normal_cdf", "uniform_noise", "LossWeights", "ToyDataset",
    "TrainSchedule", "train", "backend_name", "HscError", "ShapeError",
    "DistributionError", "CoderError", "ContainerError", "ConfigError",
    "MetricError", "TrainingDiverged",
]
