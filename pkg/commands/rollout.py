from pathlib import Path

from config import RunConfig
from envs.base import make_env
from envs.rollout import rollout_dataset
from storage.bundles import load_policy
from storage.datasets import read_dataset, write_dataset
from utils.errors import ConfigError


def run(cfg: RunConfig) -> tuple[Path, Path]:
    """테스트 궤적 시작 상태에서 정책 롤아웃을 데이터셋 형식으로 기록"""
    policy = load_policy(cfg.policy_path)
    test = read_dataset(cfg.dataset_path("test"))
    if test.meta.env_config is None:
        raise ConfigError("rollout needs a simulator dataset (env_config missing from metadata)")
    if len(test) == 0:
        raise ConfigError("test dataset is empty")

    env = make_env(test.meta.env_config)
    starts = [traj.states[0] for traj in test.trajectories[:cfg.rollout_starts]]
    generated = rollout_dataset(policy, env, starts, cfg.rollout_length, cfg.seed, cfg.rollout_samples, test)
    paths = write_dataset(generated, cfg.out / "rollout")
    print(f"rollout: {len(generated)} trajectories x {cfg.rollout_length + 1} steps -> {paths[1]}")
    return paths
