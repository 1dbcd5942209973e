"""데이터셋 파일: <name>.meta.json + <name>.records.txt"""
import io
import logging
from pathlib import Path

import numpy as np

from envs.dataset import Dataset, Trajectory, compute_ranges
from schemas.commons import EnvTag
from schemas.dataset import DatasetMeta, NormalizationRanges
from storage.files import dump_json, read_json, write_text
from utils.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)

META_SUFFIX = ".meta.json"
RECORDS_SUFFIX = ".records.txt"


def dataset_paths(base: Path) -> tuple[Path, Path]:
    """디렉터리/이름, 메타 경로, 레코드 경로 어느 쪽이든 받아 두 파일 경로로 변환"""
    base = Path(base)
    name = base.name
    for suffix in (META_SUFFIX, RECORDS_SUFFIX):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    return base.with_name(name + META_SUFFIX), base.with_name(name + RECORDS_SUFFIX)


def _column_header(state_dim: int, action_dim: int) -> str:
    cols = ["traj", "step"] + [f"s{i}" for i in range(state_dim)] + [f"a{i}" for i in range(action_dim)]
    return " ".join(cols)


def render_records(ds: Dataset) -> str:
    """한 줄 = 한 시점: 궤적 번호, 스텝, 상태, 행동 (%.17g)"""
    s_dim, a_dim = ds.meta.state_dim, ds.meta.action_dim
    blocks = []
    for j, traj in enumerate(ds.trajectories):
        n = len(traj)
        blocks.append(np.column_stack([np.full(n, j), np.arange(n), traj.states, traj.actions]))
    rows = np.concatenate(blocks) if blocks else np.empty((0, 2 + s_dim + a_dim))
    buf = io.StringIO()
    np.savetxt(buf, rows, fmt=["%d", "%d"] + ["%.17g"] * (s_dim + a_dim),
               header=_column_header(s_dim, a_dim), comments="# ")
    return buf.getvalue()


def write_dataset(ds: Dataset, base: Path) -> tuple[Path, Path]:
    meta_path, records_path = dataset_paths(base)
    write_text(meta_path, dump_json(ds.meta))
    write_text(records_path, render_records(ds))
    logger.info("wrote %s (%d trajectories, %d steps)", meta_path.name, len(ds), ds.n_steps)
    return meta_path, records_path


def _load_rows(records_path: Path, width: int) -> np.ndarray:
    rows = np.loadtxt(records_path, ndmin=2, comments="#")
    if rows.size == 0:
        return np.empty((0, width))
    if rows.shape[1] != width:
        raise ShapeError(f"{records_path}: expected {width} columns, found {rows.shape[1]}")
    return rows


def _split_trajectories(rows: np.ndarray, state_dim: int, source: Path) -> list[Trajectory]:
    if rows.shape[0] == 0:
        return []
    traj_idx = rows[:, 0].astype(int)
    if np.any(np.diff(traj_idx) < 0) or traj_idx[0] != 0 or np.any(np.diff(np.unique(traj_idx)) != 1):
        raise ConfigError(f"{source}: trajectory indices must be contiguous and start at 0")
    out = []
    for j in np.unique(traj_idx):
        block = rows[traj_idx == j]
        if not np.array_equal(block[:, 1].astype(int), np.arange(block.shape[0])):
            raise ConfigError(f"{source}: trajectory {j} has non-consecutive step indices")
        out.append(Trajectory(block[:, 2:2 + state_dim].copy(), block[:, 2 + state_dim:].copy()))
    return out


def read_dataset(base: Path) -> Dataset:
    meta_path, records_path = dataset_paths(base)
    meta = read_json(meta_path, DatasetMeta)
    rows = _load_rows(records_path, 2 + meta.state_dim + meta.action_dim)
    ds = Dataset(_split_trajectories(rows, meta.state_dim, records_path), meta)
    if meta.normalization is None and len(ds):
        logger.info("%s has no normalization ranges; computing them from its own records", meta_path.name)
        ds = ds.with_normalization(compute_ranges(*ds.arrays()))
    return ds


def import_records(records_path: Path, agent_dims: list[int], state_dim: int, env: EnvTag = EnvTag.GENERIC,
                   split: str = "train", normalization: NormalizationRanges | None = None) -> Dataset:
    """메타 없는 외부 레코드 파일(같은 열 형식)을 데이터셋으로 가져옴"""
    records_path = Path(records_path)
    action_dim = sum(agent_dims)
    rows = _load_rows(records_path, 2 + state_dim + action_dim)
    trajectories = _split_trajectories(rows, state_dim, records_path)
    lengths = {len(t) for t in trajectories}
    meta = DatasetMeta(
        env=env, split=split, n_agents=len(agent_dims), agent_dims=agent_dims, state_dim=state_dim,
        action_dim=action_dim, n_trajectories=len(trajectories),
        horizon=lengths.pop() if len(lengths) == 1 else None, normalization=normalization,
    )
    ds = Dataset(trajectories, meta)
    if normalization is None:
        ds = ds.with_normalization(compute_ranges(*ds.arrays()))
    logger.info("imported %d trajectories from %s", len(ds), records_path.name)
    return ds
