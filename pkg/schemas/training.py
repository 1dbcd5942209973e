from pydantic import BaseModel, ConfigDict, Field

from schemas.commons import (
    BandwidthRule, Components, CopulaKind, L2Weight, LearningRate, PositiveFloat, PositiveInt, Seed, Count,
)


class StageConfig(BaseModel):
    """한 학습 단계의 SGD 설정"""
    model_config = ConfigDict(extra='forbid')

    lr: LearningRate = 0.01
    l2: L2Weight = 1e-5
    epochs: Count = 200
    batch_size: PositiveInt = 128
    tol: PositiveFloat = 1e-4
    patience: PositiveInt = 1
    # 평균 헤드 그래디언트에 현재 분산을 곱함 (분산이 줄어도 SGD 안정)
    variance_scaled: bool = True


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    copula: CopulaKind = CopulaKind.KDE
    n_components: Components = 2
    copula_components: Components = 4
    hidden: PositiveInt = 64
    copula_hidden: PositiveInt = 64
    marginal: StageConfig = Field(default_factory=StageConfig)
    copula_stage: StageConfig = Field(default_factory=lambda: StageConfig(epochs=100))
    kde_bandwidth: BandwidthRule | PositiveFloat = BandwidthRule.SCOTT
    kde_max_points: PositiveInt = 20_000
    seed: Seed = 0
