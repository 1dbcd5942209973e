from typing import Any, Protocol

import numpy as np

from schemas.commons import EnvTag
from schemas.envs import DrivingConfig, PhySimConfig


class Environment(Protocol):
    tag: EnvTag
    state_dim: int
    action_dim: int
    agent_dims: list[int]

    def reset(self, rng: np.random.Generator) -> Any: ...

    def observe(self, sim: Any) -> np.ndarray: ...

    def expert(self, sim: Any, rng: np.random.Generator) -> tuple[np.ndarray, Any]: ...

    def step(self, sim: Any, actions: np.ndarray) -> Any: ...

    def from_observation(self, s: np.ndarray) -> Any: ...


def resolve_env_config(cfg: PhySimConfig | DrivingConfig, seed: int) -> PhySimConfig | DrivingConfig:
    """데이터셋 시드로 정해지는 설정값(PhySim 인접 행렬)을 채움"""
    if isinstance(cfg, PhySimConfig) and cfg.a1 is None:
        from envs.physim import random_adjacency

        a1, a2 = random_adjacency(cfg.n_particles, np.random.default_rng([seed, 0xA1]))
        return cfg.model_copy(update={"a1": a1.tolist(), "a2": a2.tolist()})
    return cfg


def make_env(cfg: PhySimConfig | DrivingConfig) -> Environment:
    if isinstance(cfg, PhySimConfig):
        from envs.physim import PhySim

        return PhySim(cfg)
    from envs.driving import Driving

    return Driving(cfg)
