import logging
from contextlib import contextmanager
from pathlib import Path

from config import RunConfig, to_train_config
from models.policy import train_policy
from schemas.commons import EnvTag
from storage.bundles import save_policy
from storage.datasets import dataset_paths, read_dataset
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

TRAIN_LOG = "train.log"


@contextmanager
def train_log(out: Path):
    """학습 중 루트 로거 기록을 <out>/train.log 에 덧붙임"""
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / TRAIN_LOG, mode="a", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    try:
        yield out / TRAIN_LOG
    finally:
        root.removeHandler(handler)
        handler.close()


def check_dataset(cfg: RunConfig, meta) -> None:
    """학습 전에 설정과 데이터셋 차원이 맞는지 확인"""
    if meta.env != cfg.env:
        raise ConfigError(f"dataset env '{meta.env.value}' does not match config env '{cfg.env.value}'")
    if cfg.env == EnvTag.PHYSIM and meta.n_agents != cfg.n_particles:
        raise ConfigError(f"dataset has {meta.n_agents} particles (D={meta.action_dim}) "
                          f"but config asks for {cfg.n_particles} (D={2 * cfg.n_particles})")
    if cfg.env == EnvTag.GENERIC and cfg.import_agent_dims is not None and meta.agent_dims != cfg.import_agent_dims:
        raise ConfigError(f"dataset agent_dims {meta.agent_dims} do not match config {cfg.import_agent_dims}")
    if meta.normalization is None:
        raise ConfigError("training dataset carries no normalization ranges")


def run(cfg: RunConfig) -> Path:
    train = read_dataset(cfg.dataset_path("train"))
    check_dataset(cfg, train.meta)
    val_meta, _ = dataset_paths(cfg.dataset_path("val"))
    val = read_dataset(val_meta) if val_meta.is_file() else None
    if val is not None and val.meta.action_dim != train.meta.action_dim:
        raise ConfigError("validation split dimensions differ from the train split")

    train_cfg = to_train_config(cfg, train.meta.env)
    with train_log(cfg.out):
        logger.info("training %s copula policy on %d steps (seed=%d)", cfg.copula.value, train.n_steps, cfg.seed)
        policy, log = train_policy(train, train_cfg, val)
        logger.info("stage=marginal epochs=%d converged=%s best_epoch=%d",
                    log.marginal.epochs_run, log.marginal.converged, log.marginal.best_epoch)
        if log.copula.skipped:
            logger.info("stage 2 skipped")
        path = save_policy(policy, cfg.policy_path)
    print(f"policy -> {path}")
    return path
