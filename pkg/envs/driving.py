"""선행차/추종차 차로 추종 세계 (상태 = 위치·속도, 행동 = 가속도)"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from schemas.commons import EnvTag
from schemas.envs import DrivingConfig
from utils.errors import InvalidScenarioError, ShapeError


class LeaderPhase(str, Enum):
    ACCELERATE = "accelerate"
    DECELERATE = "decelerate"


@dataclass(frozen=True)
class DrivingState:
    x: np.ndarray
    v: np.ndarray
    # 선행차 모드는 정책에 보이지 않음
    phase: LeaderPhase = LeaderPhase.ACCELERATE

    def as_vector(self) -> np.ndarray:
        return np.array([self.x[0], self.v[0], self.x[1], self.v[1]])


def _unpack(state) -> tuple[float, float, float, float]:
    vec = state.as_vector() if isinstance(state, DrivingState) else np.asarray(state, dtype=float)
    if vec.shape != (4,):
        raise ShapeError("driving state is (x_leader, v_leader, x_follower, v_follower)")
    return tuple(float(v) for v in vec)


def driving_expert_action(cfg: DrivingConfig, state, phase: LeaderPhase) -> tuple[np.ndarray, LeaderPhase]:
    """선행차: 상한까지 가속/정지까지 감속 교대, 추종차: 목표 간격 PD 제어"""
    x_l, v_l, x_f, v_f = _unpack(state)
    if x_f > x_l:
        raise InvalidScenarioError(f"follower ({x_f:.3f}) is ahead of leader ({x_l:.3f})")

    if phase == LeaderPhase.ACCELERATE and v_l >= cfg.leader_speed_max:
        phase = LeaderPhase.DECELERATE
    elif phase == LeaderPhase.DECELERATE and v_l <= 0.0:
        phase = LeaderPhase.ACCELERATE
    leader = cfg.leader_accel if phase == LeaderPhase.ACCELERATE else -cfg.leader_accel

    gap = x_l - x_f
    follower = cfg.kp * (gap - cfg.target_gap) + cfg.kd * (v_l - v_f)
    # 선행차가 최대 감속으로 멈춘다고 보고 min_gap 앞에서 서도록 제동
    room = gap - cfg.min_gap + v_l ** 2 / (2.0 * cfg.leader_accel)
    required = v_f ** 2 / (2.0 * room) if room > 0 else cfg.accel_clip
    if required > cfg.leader_accel:
        follower = min(follower, -required)
    follower = float(np.clip(follower, -cfg.accel_clip, cfg.accel_clip))
    return np.array([leader, follower]), phase


def driving_step(cfg: DrivingConfig, state: DrivingState, actions: np.ndarray) -> DrivingState:
    actions = np.asarray(actions, dtype=float).reshape(-1)
    if actions.shape != (2,):
        raise ShapeError("driving actions are (a_leader, a_follower)")
    # 후진 없음
    v = np.maximum(state.v + actions * cfg.dt, 0.0)
    return DrivingState(x=state.x + v * cfg.dt, v=v, phase=state.phase)


class Driving:
    tag = EnvTag.DRIVING

    def __init__(self, cfg: DrivingConfig):
        self.cfg = cfg
        self.state_dim = cfg.state_dim
        self.action_dim = 2
        self.agent_dims = cfg.agent_dims

    def reset(self, rng: np.random.Generator) -> DrivingState:
        gap = rng.uniform(*self.cfg.spawn_gap_range)
        speed = min(rng.uniform(*self.cfg.spawn_speed_range), self.cfg.leader_speed_max)
        phase = LeaderPhase.ACCELERATE if rng.random() < 0.5 else LeaderPhase.DECELERATE
        return DrivingState(x=np.array([gap, 0.0]), v=np.array([speed, speed]), phase=phase)

    def observe(self, sim: DrivingState) -> np.ndarray:
        return sim.as_vector()

    def expert(self, sim: DrivingState, rng: np.random.Generator) -> tuple[np.ndarray, DrivingState]:
        actions, phase = driving_expert_action(self.cfg, sim, sim.phase)
        if self.cfg.noise_sd > 0:
            actions = actions + rng.normal(0.0, self.cfg.noise_sd, size=2)
        return actions, DrivingState(x=sim.x, v=sim.v, phase=phase)

    def step(self, sim: DrivingState, actions: np.ndarray) -> DrivingState:
        return driving_step(self.cfg, sim, actions)

    def from_observation(self, s: np.ndarray) -> DrivingState:
        x_l, v_l, x_f, v_f = _unpack(s)
        return DrivingState(x=np.array([x_l, x_f]), v=np.array([v_l, v_f]))
