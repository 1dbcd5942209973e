"""코퓰라 분해 결합 정책: 2단계 학습, 결합 로그우도, 행동 예측"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from models.copula import (
    Copula, GaussianMixtureCopula, IndependenceCopula, gmc_init, gmc_train, kde_fit,
)
from models.marginal import (
    MarginalModel, marginal_init, marginal_logpdf, marginal_params, marginal_quantile, marginal_train, pit,
)
from models.training import TrainingCurve
from schemas.commons import CopulaKind
from schemas.dataset import NormalizationRanges
from schemas.training import TrainConfig
from utils.errors import ConfigError, DomainError, NotFittedError, ShapeError

logger = logging.getLogger(__name__)

# 예측 시 (상태 × 표본) 블록 크기
_PREDICT_BLOCK = 20_000


@dataclass(frozen=True)
class CopulaPolicy:
    marginal: MarginalModel
    copula: Copula

    def __post_init__(self):
        if self.copula.dim != self.marginal.n_coords:
            raise ShapeError(f"copula dimension {self.copula.dim} != marginal coordinates {self.marginal.n_coords}")

    @property
    def dim(self) -> int:
        return self.marginal.n_coords

    @property
    def normalization(self) -> NormalizationRanges | None:
        return self.marginal.normalization

    def predict_actions(self, states: np.ndarray, n_samples: int, rng: np.random.Generator) -> np.ndarray:
        return predict_actions(self, states, n_samples, rng)


@dataclass
class TrainingLog:
    marginal: TrainingCurve
    copula: TrainingCurve


def _require_fitted(p: CopulaPolicy) -> None:
    if not p.marginal.fitted:
        raise NotFittedError("marginal model is not trained")
    if isinstance(p.copula, GaussianMixtureCopula) and not p.copula.fitted:
        raise NotFittedError("mixture copula is not trained")


def joint_log_likelihood(p: CopulaPolicy, s: np.ndarray, a: np.ndarray):
    """Σ_d log f_d(a_d|s) + log c(F(a|s)|s)"""
    _require_fitted(p)
    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != p.dim:
        raise ShapeError(f"joint action has {a.shape[-1]} coordinates, policy has {p.dim}")
    marginal_part = marginal_logpdf(p.marginal, s, a).sum(axis=-1)
    if isinstance(p.copula, IndependenceCopula):
        out = marginal_part
    else:
        out = marginal_part + p.copula.log_density(pit(p.marginal, s, a), s)
    return float(out) if np.ndim(out) == 0 else out


def transform_to_actions(p: CopulaPolicy, s: np.ndarray, u: np.ndarray) -> np.ndarray:
    """a_d = F_d⁻¹(u_d|s)"""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != p.dim:
        raise ShapeError(f"copula point has {u.shape[-1]} coordinates, policy has {p.dim}")
    s = np.asarray(s, dtype=float)
    if s.ndim == 2 and u.ndim == 3:
        s = s[:, None, :]
    return marginal_quantile(p.marginal, s, u)


def predict_actions(p: CopulaPolicy, states: np.ndarray, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """상태 배치 (B, S)마다 코퓰라 표본 n개의 역변환 평균 (B, D)"""
    if n_samples < 1:
        raise DomainError(f"n_samples must be at least 1, got {n_samples}")
    states = np.atleast_2d(np.asarray(states, dtype=float))
    out = np.empty((states.shape[0], p.dim))
    rows = max(1, _PREDICT_BLOCK // n_samples)
    for start in range(0, states.shape[0], rows):
        block = states[start:start + rows]
        u = p.copula.sample(rng, n_samples, block)
        out[start:start + rows] = transform_to_actions(p, block, u).mean(axis=1)
    return out


def predict_action(p: CopulaPolicy, s: np.ndarray, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.ndim != 1:
        raise ShapeError("predict_action takes a single state vector")
    return predict_actions(p, s[None, :], n_samples, rng)[0]


def conditional_means(p: CopulaPolicy, states: np.ndarray) -> np.ndarray:
    """균등 가중 혼합이므로 조건부 평균 = 성분 평균의 평균"""
    means, _ = marginal_params(p.marginal, states)
    return means.mean(axis=-1)


def fit_copula(kind: CopulaKind, marginal: MarginalModel, states: np.ndarray, actions: np.ndarray,
               cfg: TrainConfig, val: tuple[np.ndarray, np.ndarray] | None = None) -> tuple[Copula, TrainingCurve]:
    """2단계: 고정된 주변 모델로 PIT 후 코퓰라 적합"""
    if kind == CopulaKind.UNIFORM:
        logger.info("stage=copula skipped (uniform copula)")
        return IndependenceCopula(dim=marginal.n_coords), TrainingCurve(stage="copula", skipped=True)

    u = pit(marginal, states, actions)
    if kind == CopulaKind.KDE:
        copula = kde_fit(u, cfg.kde_bandwidth, cfg.kde_max_points, cfg.seed)
        logger.info("stage=copula kde points=%d bandwidth=%s", copula.points.shape[0],
                    np.array2string(copula.bandwidth, precision=4))
        return copula, TrainingCurve(stage="copula", converged=True)
    if kind == CopulaKind.GMM:
        init = gmc_init(states.shape[1], marginal.n_coords, cfg.copula_components, cfg.copula_hidden, cfg.seed)
        val_pairs = None if val is None else (val[0], pit(marginal, val[0], val[1]))
        return gmc_train(init, (states, u), cfg.copula_stage, cfg.seed, val_pairs)
    raise ConfigError(f"copula kind '{kind.value}' cannot be trained from data")


def train_policy(dataset, cfg: TrainConfig, val_dataset=None,
                 marginal: MarginalModel | None = None) -> tuple[CopulaPolicy, TrainingLog]:
    """2단계 학습: 주변 → 코퓰라 (marginal이 주어지면 1단계 생략)"""
    states, actions = dataset.normalized_arrays()
    val = val_dataset.normalized_arrays() if val_dataset is not None else None
    if states.shape[0] == 0:
        raise ConfigError("training dataset is empty")

    if marginal is None:
        init = marginal_init(states.shape[1], dataset.meta.agent_dims, cfg.n_components, cfg.hidden, cfg.seed)
        marginal, marginal_curve = marginal_train(init, (states, actions), cfg.marginal, cfg.seed, val)
        marginal = replace(marginal, normalization=dataset.meta.normalization)
    else:
        marginal_curve = TrainingCurve(stage="marginal", skipped=True)

    copula, copula_curve = fit_copula(cfg.copula, marginal, states, actions, cfg, val)
    return CopulaPolicy(marginal=marginal, copula=copula), TrainingLog(marginal_curve, copula_curve)
