import numpy as np
import pytest

from hsc.codec import CodecModels
from hsc.generator import sample_dataset
from hsc.metrics import FixedFeatureExtractor
from hsc.numerics import Rng
from hsc.training import LossWeights, ToyDataset, TrainSchedule, train


@pytest.fixture(scope="session")
def extractor():
    return FixedFeatureExtractor()


@pytest.fixture(scope="session")
def fresh_models():
    """Untrained models with storage-rounded parameters."""
    models = CodecModels.build(seed=3)
    models.finalize_storage()
    return models


@pytest.fixture(scope="session")
def toy_images(fresh_models):
    imgs, codes = sample_dataset(fresh_models.generator, 16,
                                 Rng(3, stream_id=50))
    return imgs, codes


@pytest.fixture(scope="session")
def light_trained(extractor):
    """A short but real training run shared by tests that need fitted models."""
    models = CodecModels.build(seed=11)
    imgs, codes = sample_dataset(models.generator, 96, Rng(11, stream_id=50))
    dataset = ToyDataset(imgs[:80], codes[:80])
    schedule = TrainSchedule(steps_inversion=350, steps_rd=450,
                             steps_joint=150, seed=11)
    weights = LossWeights(semantic_distortion=4.0, feature_distortion=4.0)
    log = train(models, schedule, weights, dataset, extractor)
    held_out = imgs[80:]
    return models, dataset, held_out, log
