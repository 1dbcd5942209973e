import numpy as np
import pytest

from schemas.training import StageConfig, TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fast_train_config():
    def build(copula="kde", epochs: int = 40, **kwargs) -> TrainConfig:
        stage = StageConfig(lr=0.02, l2=1e-6, epochs=epochs, batch_size=64, patience=3)
        return TrainConfig(copula=copula, hidden=16, copula_hidden=16, marginal=stage, copula_stage=stage, **kwargs)

    return build
