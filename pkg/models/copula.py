"""단위 하이퍼큐브 위의 코퓰라 밀도와 샘플러"""
import logging
import math
from dataclasses import dataclass, replace
from typing import ClassVar, Sequence

import numpy as np
from scipy.special import log_softmax, logsumexp, softmax
from scipy.stats import multivariate_normal

from models.nn import GradientSet, NetworkParams, mlp_backward, mlp_forward, mlp_init, sgd_step
from models.training import SgdProblem, TrainingCurve, run_sgd
from schemas.commons import BandwidthRule, CopulaKind
from schemas.training import StageConfig
from utils.errors import ConfigError, NotEnoughDataError, NotFittedError, ShapeError, UsageError
from utils.stats import LOG_SQRT_2PI, clamp_unit, norm_cdf, norm_logpdf, norm_ppf

logger = logging.getLogger(__name__)

BANDWIDTH_FLOOR = 1e-3
SPREAD_FLOOR = 1e-3
KDE_MAX_POINTS = 20_000
# KDE 평가 시 (질의 × 지지점) 블록 크기 상한
_KDE_BLOCK = 1_000_000


class Copula:
    kind: ClassVar[CopulaKind]
    state_dependent: ClassVar[bool] = False
    dim: int

    def log_density(self, u: np.ndarray, states: np.ndarray | None = None) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int, states: np.ndarray | None = None) -> np.ndarray:
        raise NotImplementedError

    def pair_log_density(self, a: int, b: int, u2: np.ndarray, state: np.ndarray | None = None) -> np.ndarray:
        """두 좌표 (a, b)의 쌍별 주변 코퓰라 로그 밀도"""
        raise NotImplementedError

    def _sample_shape(self, n: int, states: np.ndarray | None) -> tuple[int, ...]:
        if states is not None and np.ndim(states) == 2:
            return np.shape(states)[0], n
        return (n,)


@dataclass(frozen=True)
class IndependenceCopula(Copula):
    kind: ClassVar[CopulaKind] = CopulaKind.UNIFORM
    dim: int

    def log_density(self, u, states=None):
        return np.zeros(np.shape(u)[:-1])

    def sample(self, rng, n, states=None):
        return clamp_unit(rng.random(self._sample_shape(n, states) + (self.dim,)))

    def pair_log_density(self, a, b, u2, state=None):
        return np.zeros(np.shape(u2)[:-1])


@dataclass(frozen=True)
class GaussianCopula(Copula):
    """완전 상관 가우시안 코퓰라 (해석적 기준 모델)"""
    kind: ClassVar[CopulaKind] = CopulaKind.GAUSSIAN
    corr: np.ndarray

    def __post_init__(self):
        corr = np.asarray(self.corr, dtype=float)
        object.__setattr__(self, "corr", corr)
        if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
            raise ShapeError("correlation matrix must be square")
        if not np.allclose(corr, corr.T) or not np.allclose(np.diag(corr), 1.0):
            raise ConfigError("correlation matrix must be symmetric with unit diagonal")
        if np.linalg.eigvalsh(corr).min() <= 0:
            raise ConfigError("correlation matrix must be positive definite")

    @property
    def dim(self) -> int:
        return self.corr.shape[0]

    @staticmethod
    def _log_density(corr: np.ndarray, u: np.ndarray) -> np.ndarray:
        z = norm_ppf(clamp_unit(np.asarray(u, dtype=float)))
        joint = multivariate_normal(mean=np.zeros(corr.shape[0]), cov=corr).logpdf(z)
        return np.asarray(joint) - norm_logpdf(z).sum(axis=-1)

    def log_density(self, u, states=None):
        return self._log_density(self.corr, u)

    def sample(self, rng, n, states=None):
        z = rng.multivariate_normal(np.zeros(self.dim), self.corr, size=self._sample_shape(n, states))
        return clamp_unit(norm_cdf(z))

    def pair_log_density(self, a, b, u2, state=None):
        idx = [a, b]
        return self._log_density(self.corr[np.ix_(idx, idx)], u2)


def _reflected_kernel_logsum(query: np.ndarray, points: np.ndarray, bandwidth: np.ndarray) -> np.ndarray:
    """경계 반사 가우시안 커널 곱의 지지점 평균 (로그)"""
    n, dim = points.shape
    log_norm = -np.log(bandwidth) - LOG_SQRT_2PI
    rows = max(1, _KDE_BLOCK // max(n, 1))
    out = np.empty(query.shape[0])
    for start in range(0, query.shape[0], rows):
        q = query[start:start + rows]
        acc = np.zeros((q.shape[0], n))
        for d in range(dim):
            x = q[:, d][:, None]
            p = points[:, d][None, :]
            h = bandwidth[d]
            images = np.stack([
                -0.5 * ((x - p) / h) ** 2,
                -0.5 * ((x + p) / h) ** 2,
                -0.5 * ((x - 2.0 + p) / h) ** 2,
            ])
            acc += logsumexp(images, axis=0) + log_norm[d]
        out[start:start + rows] = logsumexp(acc, axis=1) - math.log(n)
    return out


@dataclass(frozen=True)
class KdeCopula(Copula):
    """상태 독립 커널 밀도 코퓰라"""
    kind: ClassVar[CopulaKind] = CopulaKind.KDE
    points: np.ndarray
    bandwidth: np.ndarray
    kernel: str = "gaussian"

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[0] == 0:
            raise NotFittedError("KDE copula has no support points")
        if self.bandwidth.shape != (self.points.shape[1],) or np.any(self.bandwidth <= 0):
            raise ConfigError("KDE bandwidths must be positive, one per coordinate")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def log_density(self, u, states=None):
        u = np.asarray(u, dtype=float)
        flat = u.reshape(-1, self.dim)
        return _reflected_kernel_logsum(flat, self.points, self.bandwidth).reshape(u.shape[:-1])

    def sample(self, rng, n, states=None):
        shape = self._sample_shape(n, states)
        idx = rng.integers(self.points.shape[0], size=shape)
        x = self.points[idx] + rng.standard_normal(shape + (self.dim,)) * self.bandwidth
        x = np.mod(x, 2.0)
        return clamp_unit(np.where(x > 1.0, 2.0 - x, x))

    def pair_log_density(self, a, b, u2, state=None):
        # 곱 커널의 쌍별 주변 = 두 열과 그 대역폭만 남긴 KDE
        pair = KdeCopula(points=self.points[:, [a, b]], bandwidth=self.bandwidth[[a, b]])
        return pair.log_density(u2)


def scott_bandwidth(points: np.ndarray, rule: BandwidthRule = BandwidthRule.SCOTT) -> np.ndarray:
    n, dim = points.shape
    sd = points.std(axis=0, ddof=1)
    if rule == BandwidthRule.SILVERMAN:
        factor = (n * (dim + 2) / 4.0) ** (-1.0 / (dim + 4))
    else:
        factor = n ** (-1.0 / (dim + 4))
    return np.maximum(factor * sd, BANDWIDTH_FLOOR)


def kde_fit(points: np.ndarray, bandwidth: BandwidthRule | str | float | Sequence[float] = BandwidthRule.SCOTT,
            max_points: int = KDE_MAX_POINTS, seed: int = 0) -> KdeCopula:
    """코퓰라 값을 저장하고 대역폭을 정함 (상한 초과 시 비복원 균등 부표본)"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 2:
        raise NotEnoughDataError(f"KDE needs at least 2 points, got {points.shape[0]}")
    if points.shape[0] > max_points:
        keep = np.random.default_rng(seed).choice(points.shape[0], size=max_points, replace=False)
        points = points[keep]
        logger.info("KDE support subsampled to %d points", max_points)
    points = clamp_unit(points)

    if isinstance(bandwidth, (str, BandwidthRule)):
        h = scott_bandwidth(points, BandwidthRule(bandwidth))
    else:
        h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (points.shape[1],)).copy()
        h = np.maximum(h, BANDWIDTH_FLOOR)
    return KdeCopula(points=points, bandwidth=h)


@dataclass(frozen=True)
class GaussianMixtureCopula(Copula):
    """z = Φ⁻¹(u) 공간의 상태 조건부 대각 가우시안 혼합"""
    kind: ClassVar[CopulaKind] = CopulaKind.GMM
    state_dependent: ClassVar[bool] = True
    net: NetworkParams
    n_components: int
    dim: int
    fitted: bool = False

    def __post_init__(self):
        expected = self.n_components * (1 + 2 * self.dim)
        if self.net.layout.n_out != expected:
            raise ShapeError(f"copula network output {self.net.layout.n_out} != G·(1+2D) = {expected}")

    def params(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(logits (..., G), 평균 (..., G, D), log-spread (..., G, D))"""
        out = mlp_forward(self.net, states)
        g, d = self.n_components, self.dim
        lead = out.shape[:-1]
        logits = out[..., :g]
        means = out[..., g:g + g * d].reshape(lead + (g, d))
        log_spread = out[..., g + g * d:].reshape(lead + (g, d))
        return logits, means, log_spread

    def _aligned(self, states: np.ndarray, u_lead_ndim: int):
        logits, means, log_spread = self.params(states)
        extra = u_lead_ndim - (np.ndim(states) - 1)
        if np.ndim(states) == 2 and extra > 0:
            for _ in range(extra):
                logits = logits[:, None]
                means = means[:, None]
                log_spread = log_spread[:, None]
        return logits, means, log_spread

    @staticmethod
    def _log_mixture(z, logits, means, log_spread) -> np.ndarray:
        sigma = np.maximum(np.exp(log_spread), SPREAD_FLOOR)
        comp = log_softmax(logits, axis=-1) + np.sum(
            -0.5 * ((z[..., None, :] - means) / sigma) ** 2 - np.log(sigma) - LOG_SQRT_2PI, axis=-1
        )
        return logsumexp(comp, axis=-1)

    def log_density(self, u, states=None):
        if states is None:
            raise UsageError("state-dependent copula needs a state")
        u = np.asarray(u, dtype=float)
        z = norm_ppf(clamp_unit(u))
        logits, means, log_spread = self._aligned(np.asarray(states, dtype=float), u.ndim - 1)
        return self._log_mixture(z, logits, means, log_spread) - norm_logpdf(z).sum(axis=-1)

    def sample(self, rng, n, states=None):
        if states is None:
            raise UsageError("state-dependent copula needs a state")
        states = np.asarray(states, dtype=float)
        shape = self._sample_shape(n, states)
        logits, means, log_spread = self._aligned(states, len(shape))
        probs = np.broadcast_to(softmax(logits, axis=-1), shape + (self.n_components,))
        # 성분 선택: 누적 확률 역변환
        component = (rng.random(shape)[..., None] > np.cumsum(probs, axis=-1)).sum(axis=-1)
        component = np.minimum(component, self.n_components - 1)
        means = np.broadcast_to(means, shape + means.shape[-2:])
        sigma = np.broadcast_to(np.maximum(np.exp(log_spread), SPREAD_FLOOR), shape + means.shape[-2:])
        pick = component[..., None, None]
        mu = np.take_along_axis(means, pick, axis=-2)[..., 0, :]
        sd = np.take_along_axis(sigma, pick, axis=-2)[..., 0, :]
        z = mu + sd * rng.standard_normal(mu.shape)
        return clamp_unit(norm_cdf(z))

    def pair_log_density(self, a, b, u2, state=None):
        if state is None:
            raise UsageError("state-dependent copula needs a state")
        u2 = np.asarray(u2, dtype=float)
        z = norm_ppf(clamp_unit(u2))
        logits, means, log_spread = self.params(np.asarray(state, dtype=float))
        idx = [a, b]
        return self._log_mixture(z, logits, means[..., idx], log_spread[..., idx]) - norm_logpdf(z).sum(axis=-1)

    def nll_grad(self, states: np.ndarray, u: np.ndarray,
                 variance_scaled: bool = False) -> tuple[float, GradientSet]:
        """평균 −log c(u|s)와 네트워크 그래디언트"""
        states = np.atleast_2d(states)
        u = np.atleast_2d(u)
        rows = states.shape[0]
        z = norm_ppf(clamp_unit(u))
        logits, means, log_spread = self.params(states)
        sigma = np.maximum(np.exp(log_spread), SPREAD_FLOOR)
        var = sigma * sigma

        diff = z[:, None, :] - means
        z2 = diff * diff / var
        comp = log_softmax(logits, axis=-1) + np.sum(-0.5 * z2 - np.log(sigma) - LOG_SQRT_2PI, axis=-1)
        lse = logsumexp(comp, axis=-1)
        resp = np.exp(comp - lse[:, None])
        loss = float(-(lse - norm_logpdf(z).sum(axis=-1)).mean())

        grad_logits = (softmax(logits, axis=-1) - resp) / rows
        grad_means = -resp[..., None] * diff / rows
        if not variance_scaled:
            grad_means = grad_means / var
        active = np.exp(log_spread) > SPREAD_FLOOR
        grad_spread = -resp[..., None] * (z2 - 1.0) / rows * active

        grad_out = np.concatenate(
            [grad_logits, grad_means.reshape(rows, -1), grad_spread.reshape(rows, -1)], axis=1
        )
        return loss, mlp_backward(self.net, states, grad_out)

    def nll(self, states: np.ndarray, u: np.ndarray) -> float:
        return float(-self.log_density(u, states).mean())


def gmc_init(state_dim: int, dim: int, n_components: int = 4, hidden: int = 64, seed: int = 0) -> GaussianMixtureCopula:
    """성분 평균 편향만 작은 난수로 벌림, 나머지는 표준정규 (독립 코퓰라 근처)"""
    if n_components < 1 or dim < 1:
        raise ConfigError("copula components and dimension must be positive")
    net = mlp_init((state_dim, hidden, n_components * (1 + 2 * dim)), seed)
    if n_components > 1:
        b2 = net.b2.copy()
        offsets = np.random.default_rng([seed, 1]).normal(0.0, 0.5, size=n_components * dim)
        b2[n_components:n_components + n_components * dim] = offsets
        net = replace(net, b2=b2)
    return GaussianMixtureCopula(net=net, n_components=n_components, dim=dim)


def gmc_train(c: GaussianMixtureCopula, pairs: tuple[np.ndarray, np.ndarray], cfg: StageConfig, seed: int = 0,
              val_pairs: tuple[np.ndarray, np.ndarray] | None = None) -> tuple[GaussianMixtureCopula, TrainingCurve]:
    """2단계(상태 의존): log c(u|s) 최대화"""
    states, u = (np.asarray(a, dtype=float) for a in pairs)
    if states.shape[0] != u.shape[0] or u.shape[-1] != c.dim:
        raise ShapeError("copula training pairs do not match the copula dimension")

    def batch(m: GaussianMixtureCopula, idx: np.ndarray):
        return m.nll_grad(states[idx], u[idx], cfg.variance_scaled)

    def step(m: GaussianMixtureCopula, grads: GradientSet, epoch: int) -> GaussianMixtureCopula:
        return replace(m, net=sgd_step(m.net, grads, cfg.lr, cfg.l2, stage="copula", epoch=epoch))

    val_nll = None
    if val_pairs is not None:
        val_states, val_u = (np.asarray(a, dtype=float) for a in val_pairs)
        val_nll = lambda m: m.nll(val_states, val_u)  # noqa: E731

    problem = SgdProblem(
        n_rows=states.shape[0],
        batch_loss_grad=batch,
        apply_step=step,
        train_nll=lambda m: m.nll(states, u),
        val_nll=val_nll,
    )
    trained, curve = run_sgd("copula", c, problem, cfg, seed)
    if cfg.epochs == 0:
        return c, curve
    return replace(trained, fitted=True), curve


def _check_point(c: Copula, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != c.dim:
        raise ShapeError(f"copula point has {u.shape[-1]} coordinates, copula has {c.dim}")
    return clamp_unit(u)


def copula_logdensity(c: Copula, u, s=None):
    if c.state_dependent and s is None:
        raise UsageError(f"{c.kind.value} copula is state-dependent; a state is required")
    out = c.log_density(_check_point(c, u), s)
    return float(out) if np.ndim(out) == 0 else out


def copula_sample(c: Copula, s, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """n이 None이면 점 하나 (D,)"""
    if c.state_dependent and s is None:
        raise UsageError(f"{c.kind.value} copula is state-dependent; a state is required")
    out = c.sample(rng, 1 if n is None else n, s)
    return out[..., 0, :] if n is None else out
