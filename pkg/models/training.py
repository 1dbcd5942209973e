import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Generic, TypeVar

import numpy as np

from schemas.training import StageConfig
from utils.errors import TrainingDivergedError

logger = logging.getLogger(__name__)

P = TypeVar("P")
G = TypeVar("G")


@dataclass
class TrainingCurve:
    """단계별 에폭 NLL 기록 (0번 항목은 학습 전 값)"""
    stage: str
    train_nll: list[float] = field(default_factory=list)
    val_nll: list[float] = field(default_factory=list)
    best_epoch: int = 0
    converged: bool = False
    skipped: bool = False

    @property
    def epochs_run(self) -> int:
        return max(len(self.train_nll) - 1, 0)


@dataclass
class SgdProblem(Generic[P, G]):
    n_rows: int
    batch_loss_grad: Callable[[P, np.ndarray], tuple[float, G]]
    apply_step: Callable[[P, G, int], P]
    train_nll: Callable[[P], float]
    val_nll: Callable[[P], float] | None = None


def run_sgd(stage: str, params: P, problem: SgdProblem[P, G], cfg: StageConfig, seed: int) -> tuple[P, TrainingCurve]:
    """미니배치 SGD; 감시 NLL(검증 있으면 검증) 최저 파라미터를 반환"""
    curve = TrainingCurve(stage=stage)

    def measure(p: P, epoch: int) -> float:
        train = problem.train_nll(p)
        if not math.isfinite(train):
            raise TrainingDivergedError(stage, epoch)
        curve.train_nll.append(train)
        if problem.val_nll is None:
            logger.info("stage=%s epoch=%d train_nll=%.6f", stage, epoch, train)
            return train
        val = problem.val_nll(p)
        if not math.isfinite(val):
            raise TrainingDivergedError(stage, epoch, "non-finite validation loss")
        curve.val_nll.append(val)
        logger.info("stage=%s epoch=%d train_nll=%.6f val_nll=%.6f", stage, epoch, train, val)
        return val

    best, best_score = params, measure(params, 0)
    previous = best_score
    stale = 0
    rng = np.random.default_rng(seed)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(problem.n_rows)
        for start in range(0, problem.n_rows, cfg.batch_size):
            loss, grads = problem.batch_loss_grad(params, order[start:start + cfg.batch_size])
            if not math.isfinite(loss):
                raise TrainingDivergedError(stage, epoch)
            params = problem.apply_step(params, grads, epoch)

        score = measure(params, epoch)
        if score < best_score:
            best, best_score, curve.best_epoch = params, score, epoch

        improvement = (previous - score) / max(abs(previous), 1e-8)
        previous = score
        stale = stale + 1 if improvement < cfg.tol else 0
        if stale >= cfg.patience:
            curve.converged = True
            logger.info("stage=%s converged at epoch %d", stage, epoch)
            break

    return best, curve
