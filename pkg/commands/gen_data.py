import logging
from pathlib import Path

import numpy as np

from config import RunConfig, env_config
from envs.dataset import (
    SPLITS, Dataset, compute_ranges, generate_splits, scale_agent_actions, with_intervention,
)
from schemas.commons import EnvTag
from schemas.dataset import DatasetMeta, NormalizationRanges
from schemas.envs import PhySimConfig
from storage.datasets import dataset_paths, import_records, write_dataset
from storage.files import read_json
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


def _reference_ranges(cfg: RunConfig) -> NormalizationRanges | None:
    if cfg.norm_reference is None:
        return None
    meta_path, _ = dataset_paths(cfg.norm_reference)
    ranges = read_json(meta_path, DatasetMeta).normalization
    if ranges is None:
        raise ConfigError(f"{meta_path} carries no normalization ranges")
    return ranges


def _split_imported(cfg: RunConfig) -> dict[str, Dataset]:
    """외부 레코드를 궤적 단위로 섞어 비율대로 나눔 (범위는 train에서만)"""
    if cfg.import_agent_dims is None or cfg.import_state_dim is None:
        raise ConfigError("import_records needs import_agent_dims and import_state_dim")
    full = import_records(cfg.import_records, cfg.import_agent_dims, cfg.import_state_dim)
    order = np.random.default_rng(cfg.seed).permutation(len(full))
    ratios = np.asarray(cfg.split_ratios) / sum(cfg.split_ratios)
    bounds = np.floor(np.cumsum(ratios) * len(full)).astype(int)
    bounds[-1] = len(full)
    starts = np.concatenate([[0], bounds[:-1]])

    parts: dict[str, Dataset] = {}
    for split, a, b in zip(SPLITS, starts, bounds):
        trajectories = [full.trajectories[i] for i in order[a:b]]
        if not trajectories:
            continue
        meta = full.meta.model_copy(update={"split": split, "n_trajectories": len(trajectories),
                                            "seed": cfg.seed, "normalization": None})
        parts[split] = Dataset(trajectories, meta)
    if "train" not in parts:
        raise ConfigError("imported records leave the train split empty")

    ranges = _reference_ranges(cfg) or compute_ranges(*parts["train"].arrays())
    return {split: ds.with_normalization(ranges) for split, ds in parts.items()}


def _generate(cfg: RunConfig) -> dict[str, Dataset]:
    env_cfg = env_config(cfg)
    ranges = _reference_ranges(cfg)
    counts = (cfg.n_train, cfg.n_val, cfg.n_test)
    if cfg.intervene_agent is not None and isinstance(env_cfg, PhySimConfig):
        env_cfg = with_intervention(env_cfg, cfg.intervene_agent, cfg.intervene_factor, cfg.intervene_scale_noise)
    splits = generate_splits(env_cfg, counts, cfg.horizon, cfg.seed, workers=cfg.workers, normalization=ranges)
    if cfg.intervene_agent is not None and not isinstance(env_cfg, PhySimConfig):
        splits = {k: scale_agent_actions(ds, cfg.intervene_agent, cfg.intervene_factor) for k, ds in splits.items()}
    return splits


def run(cfg: RunConfig) -> dict[str, tuple[Path, Path]]:
    """데이터셋 생성(또는 외부 레코드 가져오기) 후 split별 파일 기록"""
    if cfg.import_records is not None:
        splits = _split_imported(cfg)
    elif cfg.env == EnvTag.GENERIC:
        raise ConfigError("env=generic needs import_records")
    else:
        splits = _generate(cfg)

    written = {}
    for split, ds in splits.items():
        written[split] = write_dataset(ds, cfg.dataset_path(split))
        print(f"{split}: {len(ds)} trajectories, {ds.n_steps} steps -> {written[split][1]}")
    return written
