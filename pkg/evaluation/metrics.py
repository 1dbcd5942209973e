"""평가 지표: RMSE, NLL, 주변/코퓰라 교차 조합, 반복 집계"""
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Protocol, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from envs.dataset import Dataset
from models.policy import CopulaPolicy, joint_log_likelihood
from schemas.report import EvalReport
from utils.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = (0, 1, 2)
# NLL 평가 시 한 번에 처리할 시점 수
_NLL_BLOCK = 4096


class Predictor(Protocol):
    dim: int

    def predict_actions(self, states: np.ndarray, n_samples: int, rng: np.random.Generator) -> np.ndarray: ...


def fingerprint(config: Any) -> str:
    """설정의 정규화된 JSON에 대한 sha256 앞 12자리"""
    if hasattr(config, "model_dump"):
        config = config.model_dump(mode="json")
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def aggregate(metric: str, values: Sequence[float], seeds: Sequence[int], label: str = "", config_id: str = "",
              n_samples: int | None = None) -> EvalReport:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ConfigError("no repetitions to aggregate")
    return EvalReport(
        metric=metric, label=label, value=float(values.mean()),
        sd=float(values.std(ddof=1)) if values.size > 1 else 0.0,
        repetitions=int(values.size), seeds=list(seeds), fingerprint=config_id, n_samples=n_samples,
    )


def _test_arrays(p: Predictor, test: Dataset) -> tuple[np.ndarray, np.ndarray]:
    states, actions = test.normalized_arrays()
    if states.shape[0] == 0:
        raise ConfigError("test dataset is empty")
    if actions.shape[1] != p.dim:
        raise ShapeError(f"test actions have {actions.shape[1]} coordinates, policy predicts {p.dim}")
    return states, actions


def squared_errors(p: Predictor, test: Dataset, n_samples: int, seed: int) -> np.ndarray:
    """시점별 좌표 평균 제곱오차 (정규화 단위)"""
    states, actions = _test_arrays(p, test)
    pred = p.predict_actions(states, n_samples, np.random.default_rng(seed))
    return np.mean((pred - actions) ** 2, axis=1)


def eval_rmse(p: Predictor, test: Dataset, n_samples: int = 100, seeds: Sequence[int] = DEFAULT_SEEDS,
              label: str = "", config_id: str = "") -> EvalReport:
    values = [float(np.sqrt(squared_errors(p, test, n_samples, seed).mean())) for seed in seeds]
    report = aggregate("rmse", values, seeds, label, config_id, n_samples)
    logger.info("rmse %s n_samples=%d: %.6f ± %.6f", label, n_samples, report.value, report.sd)
    return report


def mean_nll(p: CopulaPolicy, states: np.ndarray, actions: np.ndarray) -> float:
    total = 0.0
    for start in range(0, states.shape[0], _NLL_BLOCK):
        block = slice(start, start + _NLL_BLOCK)
        total += float(np.sum(joint_log_likelihood(p, states[block], actions[block])))
    return -total / states.shape[0]


def eval_nll(p: CopulaPolicy, test: Dataset, label: str = "", config_id: str = "") -> EvalReport:
    """시점당 평균 −log π(a|s) (자연로그)"""
    states, actions = _test_arrays(p, test)
    value = mean_nll(p, states, actions)
    logger.info("nll %s: %.6f", label, value)
    return EvalReport(metric="nll", label=label, value=value, fingerprint=config_id)


SWAP_LABELS = {
    ("old", "old"): "old marginals + old copula",
    ("old", "new"): "old marginals + new copula",
    ("new", "old"): "new marginals + old copula",
    ("new", "new"): "new marginals + new copula",
}


def eval_swap(old_p: CopulaPolicy, new_p: CopulaPolicy, new_test: Dataset, config_id: str = "") -> list[EvalReport]:
    """{old, new} 주변 × {old, new} 코퓰라 조합의 새 테스트 NLL"""
    if old_p.dim != new_p.dim:
        raise ShapeError(f"policies have different coordinate counts ({old_p.dim} vs {new_p.dim})")
    if old_p.normalization != new_p.normalization:
        logger.warning("swap policies were trained with different normalization ranges")

    policies = {"old": old_p, "new": new_p}
    reports = []
    for (m_key, c_key), label in SWAP_LABELS.items():
        mixed = CopulaPolicy(marginal=policies[m_key].marginal, copula=policies[c_key].copula)
        reports.append(eval_nll(mixed, new_test, label=label, config_id=config_id))
    return reports


@dataclass(frozen=True)
class BootstrapComparison:
    """RMSE(a) − RMSE(b) 와 대응 부트스트랩 신뢰구간"""
    difference: float
    low: float
    high: float
    confidence: float

    @property
    def a_better(self) -> bool:
        return self.high < 0.0


def _rmse_difference(err_a, err_b, axis=-1):
    return np.sqrt(np.mean(err_a, axis=axis)) - np.sqrt(np.mean(err_b, axis=axis))


def paired_bootstrap(err_a: np.ndarray, err_b: np.ndarray, seed: int = 0, n_resamples: int = 2000,
                     confidence: float = 0.95) -> BootstrapComparison:
    err_a = np.asarray(err_a, dtype=float)
    err_b = np.asarray(err_b, dtype=float)
    if err_a.shape != err_b.shape:
        raise ShapeError("paired errors must have the same shape")
    res = stats.bootstrap((err_a, err_b), _rmse_difference, paired=True, vectorized=True,
                          n_resamples=n_resamples, confidence_level=confidence, method="percentile",
                          rng=np.random.default_rng(seed))
    return BootstrapComparison(
        difference=float(_rmse_difference(err_a, err_b)),
        low=float(res.confidence_interval.low),
        high=float(res.confidence_interval.high),
        confidence=confidence,
    )


def compare_rmse(p_a: Predictor, p_b: Predictor, test: Dataset, n_samples: int = 100, seed: int = 0,
                 n_resamples: int = 2000) -> BootstrapComparison:
    """같은 테스트 상태·같은 시드에서 두 예측기의 RMSE 차이"""
    err_a = squared_errors(p_a, test, n_samples, seed)
    err_b = squared_errors(p_b, test, n_samples, seed)
    return paired_bootstrap(err_a, err_b, seed, n_resamples)


def reports_table(reports: Sequence[EvalReport]) -> pd.DataFrame:
    rows = [r.model_dump() for r in reports]
    df = pd.DataFrame(rows, columns=list(EvalReport.model_fields))
    df["seeds"] = df["seeds"].map(lambda s: ",".join(str(v) for v in s))
    return df


def write_reports(reports: Sequence[EvalReport], out_dir: Path, stem: str = "report") -> tuple[Path, Path]:
    """사람용 표(.txt)와 탭 구분 텍스트(.tsv)"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    df = reports_table(reports)
    text_path = out_dir / f"{stem}.txt"
    tsv_path = out_dir / f"{stem}.tsv"
    shown = df.assign(result=[f"{v:.6f} ± {s:.6f}" for v, s in zip(df["value"], df["sd"])])
    text_path.write_text(shown[["metric", "label", "result", "repetitions", "n_samples", "fingerprint"]]
                         .to_string(index=False) + "\n", encoding="utf-8")
    df.to_csv(tsv_path, sep="\t", index=False, float_format="%.17g")
    return text_path, tsv_path
