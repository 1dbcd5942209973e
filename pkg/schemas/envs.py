from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from schemas.commons import AdjacencyMode, PositiveFloat, NonNegativeFloat

Adjacency = list[list[int]]


class PhySimConfig(BaseModel):
    """스프링 입자 시뮬레이터 설정"""
    model_config = ConfigDict(extra='forbid')

    env: Literal["physim"] = "physim"
    n_particles: Annotated[int, Field(ge=2, le=64)] = 5
    spring_k: PositiveFloat = 0.1
    a1: Adjacency | None = None
    a2: Adjacency | None = None
    noise_sd: NonNegativeFloat = 0.05
    dt: PositiveFloat = 0.1
    half_width: PositiveFloat = 0.5
    adjacency_mode: AdjacencyMode = AdjacencyMode.PER_STEP
    # 개입 실험용 입자별 힘 배율
    agent_scale: list[float] | None = None
    # True면 배율을 잡음까지 포함한 행동 전체에 적용
    scale_noise: bool = False

    @model_validator(mode='after')
    def check_adjacency(self):
        if (self.a1 is None) != (self.a2 is None):
            raise ValueError("a1과 a2는 함께 지정해야 합니다")
        n = self.n_particles
        if self.a1 is not None:
            a1 = np.asarray(self.a1)
            a2 = np.asarray(self.a2)
            if a1.shape != (n, n) or a2.shape != (n, n):
                raise ValueError("인접 행렬 크기가 입자 수와 다릅니다")
            for a in (a1, a2):
                if not np.isin(a, (0, 1)).all() or not np.array_equal(a, a.T) or np.any(np.diag(a)):
                    raise ValueError("인접 행렬은 대칭 이진 행렬이고 대각선이 0이어야 합니다")
            if not np.array_equal(a1 + a2 + np.eye(n, dtype=int), np.ones((n, n), dtype=int)):
                raise ValueError("A1 + A2 + I 는 모든 원소가 1이어야 합니다")
        if self.agent_scale is not None and len(self.agent_scale) != n:
            raise ValueError("agent_scale 길이가 입자 수와 다릅니다")
        return self

    @property
    def state_dim(self) -> int:
        return 2 * self.n_particles

    @property
    def agent_dims(self) -> list[int]:
        return [2] * self.n_particles


class DrivingConfig(BaseModel):
    """차량 추종 시나리오 설정 (m, s 단위)"""
    model_config = ConfigDict(extra='forbid')

    env: Literal["driving"] = "driving"
    leader_speed_max: PositiveFloat = 15.0
    leader_accel: PositiveFloat = 2.0
    target_gap: PositiveFloat = 8.0
    min_gap: PositiveFloat = 2.0
    kp: PositiveFloat = 0.2
    kd: PositiveFloat = 0.6
    accel_clip: PositiveFloat = 3.0
    dt: PositiveFloat = 0.1
    noise_sd: NonNegativeFloat = 0.05
    spawn_gap_range: tuple[PositiveFloat, PositiveFloat] = (8.0, 20.0)
    spawn_speed_range: tuple[NonNegativeFloat, NonNegativeFloat] = (0.0, 10.0)

    @model_validator(mode='after')
    def check_ranges(self):
        if self.min_gap >= self.target_gap:
            raise ValueError("min_gap은 target_gap보다 작아야 합니다")
        if self.spawn_gap_range[0] > self.spawn_gap_range[1]:
            raise ValueError("spawn_gap_range 순서가 잘못되었습니다")
        if self.spawn_speed_range[0] > self.spawn_speed_range[1]:
            raise ValueError("spawn_speed_range 순서가 잘못되었습니다")
        return self

    @property
    def state_dim(self) -> int:
        return 4

    @property
    def agent_dims(self) -> list[int]:
        return [1, 1]


EnvConfig = Annotated[PhySimConfig | DrivingConfig, Field(discriminator="env")]
