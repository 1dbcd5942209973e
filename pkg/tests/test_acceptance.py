"""데스크 규모 PhySim 종단 검증 (느림: pytest -m slow)"""
import time

import numpy as np
import pytest
from scipy import stats

from envs.dataset import generate_dataset, generate_splits, with_intervention
from evaluation.metrics import compare_rmse, eval_nll, eval_swap
from models.marginal import marginal_init, marginal_train, pit
from models.policy import train_policy
from schemas.envs import PhySimConfig
from schemas.training import StageConfig, TrainConfig

pytestmark = pytest.mark.slow

COUNTS = (500, 100, 100)
HORIZON = 100
STAGE = StageConfig(lr=0.01, l2=1e-5, epochs=100, batch_size=128, patience=5)


def config(copula: str, seed: int) -> TrainConfig:
    return TrainConfig(copula=copula, marginal=STAGE, copula_stage=STAGE, kde_max_points=5000, seed=seed)


@pytest.fixture(scope="module")
def physim_runs():
    """시드별 (분할, 독립 정책, KDE 정책); KDE는 같은 주변 모델을 공유"""
    runs = {}
    for seed in (0, 1, 2):
        splits = generate_splits(PhySimConfig(), COUNTS, HORIZON, seed)
        uniform, _ = train_policy(splits["train"], config("uniform", seed), splits["val"])
        kde, _ = train_policy(splits["train"], config("kde", seed), marginal=uniform.marginal)
        runs[seed] = (splits, uniform, kde)
    return runs


def test_held_out_pit_is_uniform(physim_runs):
    splits, uniform, _ = physim_runs[0]
    s, a = splits["test"].normalized_arrays()
    u = pit(uniform.marginal, s, a)
    for d in range(u.shape[1]):
        assert stats.kstest(u[:, d], "uniform").pvalue > 0.01, f"coordinate {d}"


def test_kde_copula_beats_uniform_over_seeds(physim_runs):
    gaps = []
    for splits, uniform, kde in physim_runs.values():
        gaps.append(eval_nll(uniform, splits["test"]).value - eval_nll(kde, splits["test"]).value)
    assert np.mean(gaps) > 0.5


def test_copula_prediction_is_not_worse_than_independence(physim_runs):
    splits, uniform, kde = physim_runs[0]
    cmp = compare_rmse(kde, uniform, splits["test"], n_samples=100, seed=0, n_resamples=1000)
    assert cmp.low <= cmp.difference <= cmp.high
    # 같은 주변 모델이면 예측 평균이 같아 차이는 몬테카를로 잡음 수준
    assert abs(cmp.difference) < 0.01


def test_intervention_swap_ordering(physim_runs):
    splits, _, old = physim_runs[0]
    # 입자 0의 행동 전체(잡음 포함)를 두 배로
    new_cfg = with_intervention(splits["train"].meta.env_config, 0, 2.0, scale_noise=True)
    new_splits = generate_splits(new_cfg, COUNTS, HORIZON, 1000, normalization=splits["train"].meta.normalization)
    new, _ = train_policy(new_splits["train"], config("kde", 0), new_splits["val"])

    oo, on, no, nn = (r.value for r in eval_swap(old, new, new_splits["test"]))
    assert abs(no - nn) <= 0.1 * (oo - nn)
    assert max(no, nn) < min(oo, on) - 2.0


def _epoch_seconds(n_particles: int, M: int, T: int) -> float:
    ds = generate_dataset(PhySimConfig(n_particles=n_particles), M, T, seed=0)
    data = ds.normalized_arrays()
    init = marginal_init(ds.meta.state_dim, ds.meta.agent_dims, seed=0)
    cfg = StageConfig(epochs=2, patience=10)
    best = np.inf
    for _ in range(3):
        start = time.perf_counter()
        marginal_train(init, data, cfg, seed=0)
        best = min(best, time.perf_counter() - start)
    return best


def test_epoch_cost_scales_linearly():
    base = _epoch_seconds(3, 50, 100)
    # 단위(행·좌표)당 비용이 1.5배 이내
    assert _epoch_seconds(3, 100, 100) / (2 * base) <= 1.5
    assert _epoch_seconds(3, 50, 200) / (2 * base) <= 1.5
    assert _epoch_seconds(6, 50, 100) / (2 * base) <= 1.5
