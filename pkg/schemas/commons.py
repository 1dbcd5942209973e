from enum import Enum
from typing import Annotated

from pydantic import Field

Seed = Annotated[int, Field(ge=0, description="난수 시드")]

PositiveInt = Annotated[int, Field(ge=1)]

Count = Annotated[int, Field(ge=0)]

PositiveFloat = Annotated[float, Field(gt=0.0)]

NonNegativeFloat = Annotated[float, Field(ge=0.0)]

LearningRate = Annotated[float, Field(gt=0.0, le=10.0, description="SGD 학습률")]

L2Weight = Annotated[float, Field(ge=0.0, description="L2 정규화 가중치")]

Components = Annotated[int, Field(ge=1, le=64, description="혼합 성분 수")]


class CopulaKind(str, Enum):
    UNIFORM = "uniform"
    KDE = "kde"
    GMM = "gmm"
    GAUSSIAN = "gaussian"


# 데이터에서 학습 가능한 코퓰라 (가우시안은 해석적 구성 전용)
TRAINABLE_COPULAS = (CopulaKind.UNIFORM, CopulaKind.KDE, CopulaKind.GMM)


class EnvTag(str, Enum):
    PHYSIM = "physim"
    DRIVING = "driving"
    GENERIC = "generic"


class AdjacencyMode(str, Enum):
    PER_STEP = "per_step"
    PER_TRAJECTORY = "per_trajectory"


class BandwidthRule(str, Enum):
    SCOTT = "scott"
    SILVERMAN = "silverman"
