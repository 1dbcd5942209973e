"""궤적/데이터셋, [-1, 1] 정규화, 전문가 시연 생성"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat

import numpy as np

from envs.base import make_env, resolve_env_config
from schemas.commons import EnvTag
from schemas.dataset import DatasetMeta, Intervention, NormalizationRanges
from schemas.envs import DrivingConfig, PhySimConfig
from utils.errors import ConfigError, DomainError, NumericalError, ShapeError

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        if self.states.ndim != 2 or self.actions.ndim != 2:
            raise ShapeError("trajectory states and actions must be 2-D (steps, coordinates)")
        if self.states.shape[0] != self.actions.shape[0]:
            raise ShapeError(f"{self.states.shape[0]} states but {self.actions.shape[0]} actions")
        if not (np.all(np.isfinite(self.states)) and np.all(np.isfinite(self.actions))):
            raise NumericalError("trajectory contains non-finite values")

    def __len__(self) -> int:
        return self.states.shape[0]


# ---------- 정규화 ----------

def _center_half(lo, hi) -> tuple[np.ndarray, np.ndarray]:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = (hi - lo) / 2.0
    # 상수 좌표는 중심 이동만
    return (hi + lo) / 2.0, np.where(half > 0, half, 1.0)


def normalize(x: np.ndarray, lo, hi) -> np.ndarray:
    """x_n = 2(x − min)/(max − min) − 1"""
    center, half = _center_half(lo, hi)
    return (np.asarray(x, dtype=float) - center) / half


def denormalize(x_n: np.ndarray, lo, hi) -> np.ndarray:
    center, half = _center_half(lo, hi)
    return np.asarray(x_n, dtype=float) * half + center


def normalize_states(ranges: NormalizationRanges | None, s: np.ndarray) -> np.ndarray:
    return np.asarray(s, dtype=float) if ranges is None else normalize(s, ranges.state_min, ranges.state_max)


def normalize_actions(ranges: NormalizationRanges | None, a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=float) if ranges is None else normalize(a, ranges.action_min, ranges.action_max)


def denormalize_actions(ranges: NormalizationRanges | None, a_n: np.ndarray) -> np.ndarray:
    return np.asarray(a_n, dtype=float) if ranges is None else denormalize(a_n, ranges.action_min, ranges.action_max)


def compute_ranges(states: np.ndarray, actions: np.ndarray) -> NormalizationRanges:
    if states.shape[0] == 0:
        raise ConfigError("cannot compute normalization ranges of an empty dataset")
    return NormalizationRanges(
        state_min=states.min(axis=0).tolist(),
        state_max=states.max(axis=0).tolist(),
        action_min=actions.min(axis=0).tolist(),
        action_max=actions.max(axis=0).tolist(),
    )


# ---------- 데이터셋 ----------

@dataclass
class Dataset:
    """원 단위 궤적 + 메타데이터 (정규화는 읽을 때 적용)"""
    trajectories: list[Trajectory]
    meta: DatasetMeta
    _stacked: tuple[np.ndarray, np.ndarray] | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if len(self.trajectories) != self.meta.n_trajectories:
            raise ShapeError(f"metadata lists {self.meta.n_trajectories} trajectories, got {len(self.trajectories)}")
        for j, traj in enumerate(self.trajectories):
            if traj.states.shape[1] != self.meta.state_dim or traj.actions.shape[1] != self.meta.action_dim:
                raise ShapeError(f"trajectory {j} dimensions do not match metadata "
                                 f"({self.meta.state_dim} state, {self.meta.action_dim} action)")

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def n_steps(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """원 단위 (상태, 행동) 행렬"""
        if self._stacked is None:
            if not self.trajectories:
                self._stacked = (np.empty((0, self.meta.state_dim)), np.empty((0, self.meta.action_dim)))
            else:
                self._stacked = (np.concatenate([t.states for t in self.trajectories]),
                                 np.concatenate([t.actions for t in self.trajectories]))
        return self._stacked

    def normalized_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        states, actions = self.arrays()
        ranges = self.meta.normalization
        return normalize_states(ranges, states), normalize_actions(ranges, actions)

    def with_normalization(self, ranges: NormalizationRanges) -> "Dataset":
        meta = self.meta.model_copy(update={"normalization": ranges})
        return Dataset(list(self.trajectories), DatasetMeta.model_validate(meta.model_dump()))

    @classmethod
    def from_arrays(cls, states: np.ndarray, actions: np.ndarray, agent_dims: list[int] | None = None,
                    lengths: list[int] | None = None, env: EnvTag = EnvTag.GENERIC, split: str = "train",
                    normalization: NormalizationRanges | None = None) -> "Dataset":
        """(스텝, 좌표) 행렬을 궤적으로 잘라 데이터셋 구성 (외부 데이터/합성 실험용)"""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        actions = np.atleast_2d(np.asarray(actions, dtype=float))
        if states.shape[0] != actions.shape[0]:
            raise ShapeError(f"{states.shape[0]} states but {actions.shape[0]} actions")
        agent_dims = agent_dims or [1] * actions.shape[1]
        lengths = lengths or [states.shape[0]]
        if sum(lengths) != states.shape[0]:
            raise ShapeError("trajectory lengths do not add up to the number of rows")
        bounds = np.cumsum([0, *lengths])
        trajectories = [Trajectory(states[a:b].copy(), actions[a:b].copy()) for a, b in zip(bounds[:-1], bounds[1:])]
        meta = DatasetMeta(
            env=env, split=split, n_agents=len(agent_dims), agent_dims=agent_dims,
            state_dim=states.shape[1], action_dim=actions.shape[1], n_trajectories=len(trajectories),
            horizon=lengths[0] if len(set(lengths)) == 1 else None, normalization=normalization,
        )
        return cls(trajectories, meta)


def agent_coordinates(meta: DatasetMeta, agent: int) -> slice:
    if not 0 <= agent < meta.n_agents:
        raise DomainError(f"agent index {agent} out of range [0, {meta.n_agents})")
    start = sum(meta.agent_dims[:agent])
    return slice(start, start + meta.agent_dims[agent])


def scale_agent_actions(ds: Dataset, agent: int, factor: float) -> Dataset:
    """한 에이전트의 원 단위 행동 좌표에 factor를 곱함 (정규화 범위는 유지)"""
    coords = agent_coordinates(ds.meta, agent)
    trajectories = []
    for traj in ds.trajectories:
        actions = traj.actions.copy()
        actions[:, coords] *= factor
        trajectories.append(Trajectory(traj.states, actions))
    meta = ds.meta.model_copy(update={"intervention": Intervention(agent=agent, factor=factor)})
    return Dataset(trajectories, meta)


# ---------- 생성 ----------

def _generate_one(env_cfg: PhySimConfig | DrivingConfig, seed_seq: np.random.SeedSequence, T: int) -> Trajectory:
    env = make_env(env_cfg)
    rng = np.random.default_rng(seed_seq)
    sim = env.reset(rng)
    states = np.empty((T, env.state_dim))
    actions = np.empty((T, env.action_dim))
    for t in range(T):
        states[t] = env.observe(sim)
        actions[t], sim = env.expert(sim, rng)
        sim = env.step(sim, actions[t])
    return Trajectory(states, actions)


def with_intervention(env_cfg: PhySimConfig | DrivingConfig, agent: int, factor: float,
                      scale_noise: bool = False) -> PhySimConfig:
    """PhySim 전문가 안에서 한 입자의 힘을 배율 조정 (scale_noise면 잡음 포함 행동 전체)"""
    if not isinstance(env_cfg, PhySimConfig):
        raise ConfigError("in-simulator interventions are only defined for PhySim")
    if not 0 <= agent < env_cfg.n_particles:
        raise DomainError(f"agent index {agent} out of range [0, {env_cfg.n_particles})")
    scale = list(env_cfg.agent_scale or [1.0] * env_cfg.n_particles)
    scale[agent] = scale[agent] * factor
    return env_cfg.model_copy(update={"agent_scale": scale, "scale_noise": scale_noise})


def generate_dataset(env_cfg: PhySimConfig | DrivingConfig, M: int, T: int, seed: int, *,
                     split: str = "train", stream_offset: int = 0,
                     normalization: NormalizationRanges | None = None, workers: int = 1) -> Dataset:
    """궤적마다 SeedSequence([seed, offset + j]) 독립 스트림; 결과는 궤적 번호 순"""
    if M < 1 or T < 1:
        raise ConfigError(f"trajectory count and length must be at least 1, got M={M}, T={T}")
    env_cfg = resolve_env_config(env_cfg, seed)
    seeds = [np.random.SeedSequence([seed, stream_offset + j]) for j in range(M)]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trajectories = list(pool.map(_generate_one, repeat(env_cfg), seeds, repeat(T), chunksize=8))
    else:
        trajectories = [_generate_one(env_cfg, s, T) for s in seeds]

    intervention = None
    if isinstance(env_cfg, PhySimConfig) and env_cfg.agent_scale is not None:
        changed = [i for i, f in enumerate(env_cfg.agent_scale) if f != 1.0]
        if len(changed) == 1:
            intervention = Intervention(agent=changed[0], factor=env_cfg.agent_scale[changed[0]])

    meta = DatasetMeta(
        env=EnvTag(env_cfg.env), split=split, n_agents=len(env_cfg.agent_dims), agent_dims=env_cfg.agent_dims,
        state_dim=env_cfg.state_dim, action_dim=sum(env_cfg.agent_dims), n_trajectories=M, horizon=T,
        seed=seed, env_config=env_cfg, intervention=intervention,
    )
    ds = Dataset(trajectories, meta)
    ranges = normalization or compute_ranges(*ds.arrays())
    logger.info("generated %s split: %d trajectories x %d steps (env=%s seed=%d)", split, M, T, env_cfg.env, seed)
    return ds.with_normalization(ranges)


def generate_splits(env_cfg: PhySimConfig | DrivingConfig, counts: tuple[int, int, int], T: int, seed: int, *,
                    workers: int = 1, normalization: NormalizationRanges | None = None) -> dict[str, Dataset]:
    """train/val/test 분할: 정규화 범위는 train에서만 계산해 공유"""
    env_cfg = resolve_env_config(env_cfg, seed)
    out: dict[str, Dataset] = {}
    offset = 0
    for split, m in zip(SPLITS, counts):
        if m == 0:
            continue
        ds = generate_dataset(env_cfg, m, T, seed, split=split, stream_offset=offset,
                              normalization=normalization, workers=workers)
        if normalization is None:
            normalization = ds.meta.normalization
        out[split] = ds
        offset += m
    if "train" not in out:
        raise ConfigError("the train split needs at least one trajectory")
    return out
