import logging
from pathlib import Path

from config import RunConfig
from evaluation.metrics import compare_rmse, eval_nll, eval_rmse, eval_swap, fingerprint, write_reports
from schemas.report import EvalReport
from storage.bundles import load_policy
from storage.datasets import read_dataset
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


def run(cfg: RunConfig) -> tuple[Path, Path]:
    """요청된 지표를 계산해 report.txt / report.tsv 로 기록"""
    policy = load_policy(cfg.policy_path)
    test = read_dataset(cfg.dataset_path("test"))
    config_id = fingerprint(cfg)
    label = policy.copula.kind.value
    reports: list[EvalReport] = []

    for metric in cfg.metrics:
        if metric == "rmse":
            reports.append(eval_rmse(policy, test, cfg.n_samples, cfg.eval_seeds, label, config_id))
        elif metric == "rmse_single":
            reports.append(eval_rmse(policy, test, 1, cfg.eval_seeds, label, config_id))
        elif metric == "nll":
            reports.append(eval_nll(policy, test, label, config_id))
        elif metric == "swap":
            if cfg.new_policy is None or cfg.new_test_data is None:
                raise ConfigError("swap evaluation needs new_policy and new_test_data")
            reports.extend(eval_swap(policy, load_policy(cfg.new_policy), read_dataset(cfg.new_test_data), config_id))
        elif metric == "bootstrap":
            if cfg.baseline_policy is None:
                raise ConfigError("bootstrap comparison needs baseline_policy")
            baseline = load_policy(cfg.baseline_policy)
            cmp = compare_rmse(policy, baseline, test, cfg.n_samples, cfg.eval_seeds[0])
            reports.append(EvalReport(
                metric="rmse_diff",
                label=f"{label} - {baseline.copula.kind.value} {cmp.confidence:.0%} CI [{cmp.low:.6f}, {cmp.high:.6f}]",
                value=cmp.difference, seeds=[cfg.eval_seeds[0]], fingerprint=config_id, n_samples=cfg.n_samples,
            ))

    text_path, tsv_path = write_reports(reports, cfg.out)
    print(text_path.read_text(encoding="utf-8"), end="")
    return text_path, tsv_path
