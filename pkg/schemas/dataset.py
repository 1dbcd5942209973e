from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from schemas.commons import Count, EnvTag
from schemas.envs import EnvConfig

DATASET_FORMAT = "copula-il/dataset/v1"


class NormalizationRanges(BaseModel):
    """[-1, 1] 정규화에 쓰는 좌표별 최소/최대"""
    model_config = ConfigDict(extra='forbid')

    state_min: list[float]
    state_max: list[float]
    action_min: list[float]
    action_max: list[float]

    @model_validator(mode='after')
    def check_lengths(self):
        if len(self.state_min) != len(self.state_max) or len(self.action_min) != len(self.action_max):
            raise ValueError("최소/최대 길이가 다릅니다")
        return self


class Intervention(BaseModel):
    model_config = ConfigDict(extra='forbid')

    agent: Count
    factor: float


class DatasetMeta(BaseModel):
    model_config = ConfigDict(extra='forbid')

    format: Literal["copula-il/dataset/v1"] = DATASET_FORMAT
    env: EnvTag
    split: str = "train"
    n_agents: Annotated[int, Field(ge=1)]
    agent_dims: list[Annotated[int, Field(ge=1)]]
    state_dim: Annotated[int, Field(ge=1)]
    action_dim: Annotated[int, Field(ge=1)]
    n_trajectories: Count
    horizon: Count | None = None
    seed: int | None = None
    normalization: NormalizationRanges | None = None
    env_config: EnvConfig | None = None
    intervention: Intervention | None = None

    @model_validator(mode='after')
    def check_dims(self):
        if len(self.agent_dims) != self.n_agents:
            raise ValueError("agent_dims 길이가 n_agents와 다릅니다")
        if sum(self.agent_dims) != self.action_dim:
            raise ValueError("agent_dims 합이 action_dim과 다릅니다")
        if self.normalization is not None:
            if len(self.normalization.state_min) != self.state_dim:
                raise ValueError("정규화 범위 길이가 state_dim과 다릅니다")
            if len(self.normalization.action_min) != self.action_dim:
                raise ValueError("정규화 범위 길이가 action_dim과 다릅니다")
        return self
