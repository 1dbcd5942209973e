from pathlib import Path

from config import RunConfig
from envs.dataset import normalize_states
from evaluation.grid import export_copula_grid, write_grid
from storage.bundles import load_policy
from storage.datasets import read_dataset
from utils.errors import ConfigError


def run(cfg: RunConfig) -> list[Path]:
    """요청된 좌표 쌍마다 격자 파일 copula_grid_<a>_<b>.txt"""
    policy = load_policy(cfg.policy_path)
    state = None
    if policy.copula.state_dependent:
        if cfg.grid_state_index is None:
            raise ConfigError("state-dependent copula grids need grid_state_index (a test-set row)")
        raw_states, _ = read_dataset(cfg.dataset_path("test")).arrays()
        if cfg.grid_state_index >= raw_states.shape[0]:
            raise ConfigError(f"grid_state_index {cfg.grid_state_index} exceeds {raw_states.shape[0]} test rows")
        state = normalize_states(policy.normalization, raw_states[cfg.grid_state_index])

    written = []
    for a, b in cfg.grid_pairs:
        grid = export_copula_grid(policy, a, b, cfg.grid_resolution, state)
        path = write_grid(cfg.out / f"copula_grid_{a}_{b}.txt", grid, a, b, policy.copula.kind.value, state)
        print(f"copula grid ({a}, {b}) mean={grid.mean():.4f} -> {path}")
        written.append(path)
    return written
