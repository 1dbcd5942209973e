import math

import numpy as np
from scipy import special, stats

from utils.errors import DomainError

# 단위 큐브 경계 클램핑
CUBE_EPS = 1e-6
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def clamp_unit(u: np.ndarray) -> np.ndarray:
    return np.clip(u, CUBE_EPS, 1.0 - CUBE_EPS)


def check_probability(u: np.ndarray) -> np.ndarray:
    """[0,1] 밖이거나 NaN이면 DomainError, 아니면 클램핑된 값"""
    u = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(u)) or np.any(u < 0.0) or np.any(u > 1.0):
        raise DomainError("probability outside [0, 1]")
    return clamp_unit(u)


def norm_cdf(x):
    return special.ndtr(x)


def norm_ppf(u):
    return special.ndtri(u)


def norm_logpdf(x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - LOG_SQRT_2PI


def ks_uniform(u: np.ndarray) -> tuple[float, float]:
    """Kolmogorov-Smirnov 균등성 검정 (statistic, p-value)"""
    result = stats.kstest(np.ravel(u), "uniform")
    return float(result.statistic), float(result.pvalue)
