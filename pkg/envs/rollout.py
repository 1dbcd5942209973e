"""학습된 정책으로 궤적 생성 (예측 → 환경 진행 반복)"""
import logging

import numpy as np

from envs.base import Environment
from envs.dataset import Dataset, Trajectory, denormalize_actions, normalize_states
from models.policy import CopulaPolicy, predict_action
from schemas.dataset import NormalizationRanges
from utils.errors import DomainError, RolloutDivergedError

logger = logging.getLogger(__name__)


def rollout(p: CopulaPolicy, env: Environment, s0: np.ndarray, L: int, rng: np.random.Generator,
            n_samples: int = 1, ranges: NormalizationRanges | None = None) -> Trajectory:
    """l = 0..L 에서 (s[l], â[l]) L+1쌍을 원 단위로 반환"""
    if L < 0:
        raise DomainError(f"rollout length must be non-negative, got {L}")
    ranges = ranges if ranges is not None else p.normalization
    sim = env.from_observation(np.asarray(s0, dtype=float))
    states = np.empty((L + 1, env.state_dim))
    actions = np.empty((L + 1, env.action_dim))

    for step in range(L + 1):
        s = env.observe(sim)
        if not np.all(np.isfinite(s)):
            raise RolloutDivergedError(step)
        a = denormalize_actions(ranges, predict_action(p, normalize_states(ranges, s), n_samples, rng))
        if not np.all(np.isfinite(a)):
            raise RolloutDivergedError(step)
        states[step], actions[step] = s, a
        if step < L:
            sim = env.step(sim, a)

    logger.debug("rollout finished: %d steps", L + 1)
    return Trajectory(states, actions)


def rollout_dataset(p: CopulaPolicy, env: Environment, starts: np.ndarray, L: int, seed: int,
                    n_samples: int = 1, reference: Dataset | None = None) -> Dataset:
    """시작 상태마다 독립 스트림으로 롤아웃해 데이터셋 형식으로 묶음"""
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    trajectories = [
        rollout(p, env, s0, L, np.random.default_rng([seed, j]), n_samples)
        for j, s0 in enumerate(starts)
    ]
    stacked_s = np.concatenate([t.states for t in trajectories])
    stacked_a = np.concatenate([t.actions for t in trajectories])
    ds = Dataset.from_arrays(stacked_s, stacked_a, agent_dims=list(env.agent_dims),
                             lengths=[len(t) for t in trajectories], env=env.tag, split="rollout",
                             normalization=p.normalization)
    meta_update = {"seed": seed}
    if reference is not None and reference.meta.env_config is not None:
        meta_update["env_config"] = reference.meta.env_config
    return Dataset(ds.trajectories, ds.meta.model_copy(update=meta_update))
