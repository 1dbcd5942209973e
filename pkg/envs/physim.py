"""박스 안 스프링 입자 세계 (상태 = 위치, 행동 = 가속도)"""
from dataclasses import dataclass, replace

import numpy as np

from schemas.commons import AdjacencyMode, EnvTag
from schemas.envs import PhySimConfig
from utils.errors import ConfigError, ShapeError


@dataclass(frozen=True)
class PhySimState:
    positions: np.ndarray
    velocities: np.ndarray
    # 궤적 단위 인접 행렬 모드에서만 사용
    adjacency: np.ndarray | None = None


def random_adjacency(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """대칭 Bernoulli(0.5) A1과 그 보완 행렬 A2"""
    upper = np.triu(rng.integers(0, 2, size=(n, n)), k=1)
    a1 = upper + upper.T
    a2 = np.ones((n, n), dtype=int) - np.eye(n, dtype=int) - a1
    return a1, a2


def spring_accelerations(positions: np.ndarray, adjacency: np.ndarray, k: float) -> np.ndarray:
    """a_i = −k·Σ_j A_ij (r_i − r_j)"""
    adjacency = np.asarray(adjacency, dtype=float)
    return -k * (adjacency.sum(axis=1)[:, None] * positions - adjacency @ positions)


def _adjacencies(cfg: PhySimConfig) -> tuple[np.ndarray, np.ndarray]:
    if cfg.a1 is None:
        raise ConfigError("PhySim adjacency matrices are not resolved")
    return np.asarray(cfg.a1), np.asarray(cfg.a2)


def _as_positions(cfg: PhySimConfig, positions: np.ndarray) -> np.ndarray:
    positions = np.asarray(positions, dtype=float)
    if positions.size != 2 * cfg.n_particles:
        raise ShapeError(f"expected {2 * cfg.n_particles} position coordinates, got {positions.size}")
    return positions.reshape(cfg.n_particles, 2)


def physim_expert_action(cfg: PhySimConfig, positions: np.ndarray, rng: np.random.Generator,
                         adjacency: np.ndarray | None = None) -> np.ndarray:
    """{A1, A2} 중 하나를 균등 추출해 스프링 가속도 + 가우시안 잡음 (2N,)"""
    r = _as_positions(cfg, positions)
    if adjacency is None:
        a1, a2 = _adjacencies(cfg)
        adjacency = a1 if rng.random() < 0.5 else a2
    acc = spring_accelerations(r, adjacency, cfg.spring_k)
    scale = np.ones((cfg.n_particles, 1)) if cfg.agent_scale is None else np.asarray(cfg.agent_scale)[:, None]
    if not cfg.scale_noise:
        acc = acc * scale
    if cfg.noise_sd > 0:
        acc = acc + rng.normal(0.0, cfg.noise_sd, size=acc.shape)
    if cfg.scale_noise:
        acc = acc * scale
    return acc.reshape(-1)


def physim_step(cfg: PhySimConfig, state: PhySimState, actions: np.ndarray) -> PhySimState:
    """semi-implicit Euler + 벽 탄성 반사"""
    acc = _as_positions(cfg, actions)
    v = state.velocities + acc * cfg.dt
    r = state.positions + v * cfg.dt
    h = cfg.half_width
    over, under = r > h, r < -h
    r = np.where(over, 2 * h - r, np.where(under, -2 * h - r, r))
    v = np.where(over | under, -v, v)
    return replace(state, positions=np.clip(r, -h, h), velocities=v)


def kinetic_energy(state: PhySimState) -> float:
    return 0.5 * float(np.sum(state.velocities ** 2))


def spring_energy(positions: np.ndarray, adjacency: np.ndarray, k: float) -> float:
    diff = positions[:, None, :] - positions[None, :, :]
    return 0.25 * k * float(np.sum(np.asarray(adjacency)[..., None] * diff ** 2))


class PhySim:
    tag = EnvTag.PHYSIM

    def __init__(self, cfg: PhySimConfig):
        _adjacencies(cfg)
        self.cfg = cfg
        self.state_dim = cfg.state_dim
        self.action_dim = cfg.state_dim
        self.agent_dims = cfg.agent_dims

    def reset(self, rng: np.random.Generator) -> PhySimState:
        h = self.cfg.half_width
        n = self.cfg.n_particles
        adjacency = None
        if self.cfg.adjacency_mode == AdjacencyMode.PER_TRAJECTORY:
            a1, a2 = _adjacencies(self.cfg)
            adjacency = a1 if rng.random() < 0.5 else a2
        return PhySimState(rng.uniform(-h, h, size=(n, 2)), np.zeros((n, 2)), adjacency)

    def observe(self, sim: PhySimState) -> np.ndarray:
        return sim.positions.reshape(-1).copy()

    def expert(self, sim: PhySimState, rng: np.random.Generator) -> tuple[np.ndarray, PhySimState]:
        return physim_expert_action(self.cfg, sim.positions, rng, sim.adjacency), sim

    def step(self, sim: PhySimState, actions: np.ndarray) -> PhySimState:
        return physim_step(self.cfg, sim, actions)

    def from_observation(self, s: np.ndarray) -> PhySimState:
        """정책 롤아웃 시작점: 속도는 내부 상태이므로 0에서 시작"""
        r = _as_positions(self.cfg, s).copy()
        return PhySimState(r, np.zeros_like(r))
