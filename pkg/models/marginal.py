"""1차원 가우시안 혼합과 상태 조건부 주변 정책 모델"""
import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from models.nn import GradientSet, NetworkParams, mlp_backward, mlp_forward, mlp_init, sgd_step
from models.training import SgdProblem, TrainingCurve, run_sgd
from schemas.dataset import NormalizationRanges
from schemas.training import StageConfig
from utils.errors import ConfigError, ShapeError
from utils.stats import LOG_SQRT_2PI, check_probability, clamp_unit, norm_cdf

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-3
QUANTILE_TOL = 1e-9


def mixture_logpdf(x, weights, means, stds) -> np.ndarray:
    """혼합 성분 축(마지막 축)에 대해 log-sum-exp"""
    x = np.asarray(x, dtype=float)
    z = (x[..., None] - means) / stds
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    return logsumexp(log_w - 0.5 * z * z - np.log(stds) - LOG_SQRT_2PI, axis=-1)


def mixture_cdf(x, weights, means, stds) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sum(weights * norm_cdf((x[..., None] - means) / stds), axis=-1)


def mixture_quantile(u, weights, means, stds, tol: float = QUANTILE_TOL, max_iter: int = 200) -> np.ndarray:
    """구간 확장(2배씩) 후 이분법으로 CDF 역함수를 구함"""
    u = np.asarray(u, dtype=float)
    shape = np.broadcast_shapes(u.shape, np.shape(means)[:-1], np.shape(stds)[:-1], np.shape(weights)[:-1])
    u = np.broadcast_to(u, shape)
    k = np.shape(means)[-1]
    weights = np.broadcast_to(weights, shape + (k,))
    means = np.broadcast_to(means, shape + (k,))
    stds = np.broadcast_to(stds, shape + (k,))

    spread = stds.max(axis=-1)
    lo = means.min(axis=-1) - 10.0 * spread
    hi = means.max(axis=-1) + 10.0 * spread
    width = hi - lo
    for _ in range(max_iter):
        low_open = mixture_cdf(lo, weights, means, stds) > u
        high_open = mixture_cdf(hi, weights, means, stds) < u
        if not (low_open.any() or high_open.any()):
            break
        lo = np.where(low_open, lo - width, lo)
        hi = np.where(high_open, hi + width, hi)
        width = 2.0 * width

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        below = mixture_cdf(mid, weights, means, stds) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4.0 * np.spacing(np.maximum(np.abs(mid), 1.0))):
            break
    mid = 0.5 * (lo + hi)
    err = np.abs(mixture_cdf(mid, weights, means, stds) - u)
    if np.any(err > tol):
        logger.debug("quantile search stopped with cdf error %.3g", float(err.max()))
    return mid


@dataclass(frozen=True)
class GaussianMixture1D:
    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        for name in ("weights", "means", "stds"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        if not (self.weights.size == self.means.size == self.stds.size) or self.weights.size == 0:
            raise ShapeError("mixture weights, means and stds must have the same nonzero length")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ConfigError("mixture weights must be nonnegative and sum to 1")
        if np.any(self.stds < VARIANCE_FLOOR * (1 - 1e-12)):
            raise ConfigError(f"mixture stds must be at least {VARIANCE_FLOOR}")

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def mean(self) -> float:
        return float(self.weights @ self.means)


def gm_logpdf(gm: GaussianMixture1D, x):
    out = mixture_logpdf(x, gm.weights, gm.means, gm.stds)
    return float(out) if np.ndim(out) == 0 else out


def gm_cdf(gm: GaussianMixture1D, x):
    out = mixture_cdf(x, gm.weights, gm.means, gm.stds)
    return float(out) if np.ndim(out) == 0 else out


def gm_quantile(gm: GaussianMixture1D, u):
    u = check_probability(u)
    out = mixture_quantile(u, gm.weights, gm.means, gm.stds)
    return float(out) if np.ndim(out) == 0 else out


def gm_sample(gm: GaussianMixture1D, rng: np.random.Generator, size: int | None = None):
    component = rng.choice(gm.n_components, size=size, p=gm.weights)
    return rng.normal(gm.means[component], gm.stds[component])


def agent_coords_from_dims(agent_dims: Sequence[int]) -> tuple[tuple[int, ...], ...]:
    coords, start = [], 0
    for dim in agent_dims:
        coords.append(tuple(range(start, start + dim)))
        start += dim
    return tuple(coords)


@dataclass(frozen=True)
class MarginalModel:
    """상태 → 좌표별 K개 평균을 내는 MLP + 좌표별 자유 log-spread"""
    net: NetworkParams
    log_spread: np.ndarray
    n_components: int
    agent_coords: tuple[tuple[int, ...], ...]
    fitted: bool = False
    normalization: NormalizationRanges | None = None

    def __post_init__(self):
        d = self.log_spread.shape[0] if self.log_spread.ndim == 1 else -1
        if d < 1:
            raise ShapeError("log_spread must be a nonempty vector")
        if self.net.layout.n_out != self.n_components * d:
            raise ShapeError(f"network output {self.net.layout.n_out} != K·D = {self.n_components * d}")
        flat = sorted(c for coords in self.agent_coords for c in coords)
        if flat != list(range(d)):
            raise ShapeError("agent coordinate map must cover every coordinate exactly once")

    @property
    def n_coords(self) -> int:
        return self.log_spread.shape[0]

    @property
    def state_dim(self) -> int:
        return self.net.layout.n_in

    @property
    def stds(self) -> np.ndarray:
        return np.maximum(np.exp(self.log_spread), VARIANCE_FLOOR)


def clamp_log_spread(log_spread: np.ndarray) -> np.ndarray:
    """하한 아래로 내려간 log-spread를 log(하한)으로 되돌림"""
    return np.maximum(log_spread, np.log(VARIANCE_FLOOR))


def marginal_init(state_dim: int, agent_dims: Sequence[int], n_components: int = 2, hidden: int = 64,
                  seed: int = 0) -> MarginalModel:
    """성분 평균 편향을 [-0.5, 0.5]에 벌려 대칭을 깸"""
    d = int(sum(agent_dims))
    if n_components < 1 or d < 1:
        raise ConfigError("n_components and action dimension must be positive")
    net = mlp_init((state_dim, hidden, n_components * d), seed)
    if n_components > 1:
        offsets = np.tile(np.linspace(-0.5, 0.5, n_components), d)
        net = replace(net, b2=offsets)
    return MarginalModel(
        net=net,
        log_spread=np.zeros(d),
        n_components=n_components,
        agent_coords=agent_coords_from_dims(agent_dims),
    )


def marginal_params(model: MarginalModel, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(평균 (..., D, K), 표준편차 (D, 1))"""
    states = np.asarray(states, dtype=float)
    if states.ndim > 2:
        out = mlp_forward(model.net, states.reshape(-1, states.shape[-1]))
        out = out.reshape(states.shape[:-1] + (out.shape[-1],))
    else:
        out = mlp_forward(model.net, states)
    means = out.reshape(out.shape[:-1] + (model.n_coords, model.n_components))
    return means, model.stds[:, None]


def marginal_forward(model: MarginalModel, s: np.ndarray) -> list[GaussianMixture1D]:
    s = np.asarray(s, dtype=float)
    if s.ndim != 1:
        raise ShapeError("marginal_forward takes a single state vector")
    means, stds = marginal_params(model, s)
    weights = np.full(model.n_components, 1.0 / model.n_components)
    return [
        GaussianMixture1D(weights, means[d], np.full(model.n_components, stds[d, 0]))
        for d in range(model.n_coords)
    ]


def _check_actions(model: MarginalModel, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != model.n_coords:
        raise ShapeError(f"action size {a.shape[-1]} != coordinate count {model.n_coords}")
    return a


def marginal_logpdf(model: MarginalModel, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """좌표별 로그 밀도 (..., D)"""
    actions = _check_actions(model, actions)
    means, stds = marginal_params(model, states)
    weights = np.full(model.n_components, 1.0 / model.n_components)
    return mixture_logpdf(actions, weights, means, stds)


def marginal_cdf(model: MarginalModel, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    actions = _check_actions(model, actions)
    means, stds = marginal_params(model, states)
    weights = np.full(model.n_components, 1.0 / model.n_components)
    return mixture_cdf(actions, weights, means, stds)


def marginal_quantile(model: MarginalModel, states: np.ndarray, u: np.ndarray) -> np.ndarray:
    """u (..., D) → 행동; states는 u의 앞쪽 축과 브로드캐스트"""
    u = check_probability(u)
    means, stds = marginal_params(model, states)
    weights = np.full(model.n_components, 1.0 / model.n_components)
    return mixture_quantile(u, weights, means, stds)


def marginal_sample(model: MarginalModel, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """상태 배치마다 독립 표본 (B, D)"""
    means, stds = marginal_params(model, np.atleast_2d(states))
    component = rng.integers(model.n_components, size=means.shape[:-1])
    chosen = np.take_along_axis(means, component[..., None], axis=-1)[..., 0]
    return chosen + stds[:, 0] * rng.standard_normal(chosen.shape)


def marginal_nll(model: MarginalModel, states: np.ndarray, actions: np.ndarray) -> float:
    """타임스텝당 평균 음의 로그우도 (좌표 합)"""
    return float(-marginal_logpdf(model, states, actions).sum(axis=-1).mean())


def marginal_nll_grad(model: MarginalModel, states: np.ndarray, actions: np.ndarray,
                      variance_scaled: bool = False) -> tuple[float, GradientSet, np.ndarray]:
    """평균 NLL과 네트워크/ log-spread 그래디언트 (variance_scaled면 평균 헤드에 σ² 곱)"""
    states = np.atleast_2d(states)
    actions = np.atleast_2d(_check_actions(model, actions))
    rows = states.shape[0]
    means, stds = marginal_params(model, states)
    var = stds[None] ** 2

    diff = actions[..., None] - means
    z2 = diff * diff / var
    comp = -np.log(model.n_components) - 0.5 * z2 - np.log(stds)[None] - LOG_SQRT_2PI
    lse = logsumexp(comp, axis=-1)
    resp = np.exp(comp - lse[..., None])
    loss = float(-lse.sum(axis=-1).mean())

    grad_means = -resp * diff / rows
    if not variance_scaled:
        grad_means = grad_means / var
    grad_spread = -(resp * (z2 - 1.0)).sum(axis=-1).sum(axis=0) / rows

    grads = mlp_backward(model.net, states, grad_means.reshape(rows, -1))
    return loss, grads, grad_spread


def _as_arrays(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, tuple):
        return np.asarray(data[0], dtype=float), np.asarray(data[1], dtype=float)
    return data.normalized_arrays()


def marginal_train(model: MarginalModel, dataset, cfg: StageConfig, seed: int = 0,
                   val_dataset=None) -> tuple[MarginalModel, TrainingCurve]:
    """1단계: 주변 정책 최대우도 학습"""
    states, actions = _as_arrays(dataset)
    if states.shape[0] == 0:
        raise ConfigError("cannot train marginals on an empty dataset")
    _check_actions(model, actions)

    def step(m: MarginalModel, grads: tuple[GradientSet, np.ndarray], epoch: int) -> MarginalModel:
        net_grads, spread_grads = grads
        return replace(
            m,
            net=sgd_step(m.net, net_grads, cfg.lr, cfg.l2, stage="marginal", epoch=epoch),
            log_spread=clamp_log_spread(m.log_spread - cfg.lr * spread_grads),
        )

    def batch(m: MarginalModel, idx: np.ndarray):
        loss, net_grads, spread_grads = marginal_nll_grad(m, states[idx], actions[idx], cfg.variance_scaled)
        return loss, (net_grads, spread_grads)

    val_nll = None
    if val_dataset is not None:
        val_states, val_actions = _as_arrays(val_dataset)
        val_nll = lambda m: marginal_nll(m, val_states, val_actions)  # noqa: E731

    problem = SgdProblem(
        n_rows=states.shape[0],
        batch_loss_grad=batch,
        apply_step=step,
        train_nll=lambda m: marginal_nll(m, states, actions),
        val_nll=val_nll,
    )
    trained, curve = run_sgd("marginal", model, problem, cfg, seed)
    if cfg.epochs == 0:
        return model, curve
    return replace(trained, fitted=True), curve


def pit(model: MarginalModel, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    """확률 적분 변환 u_d = F_d(a_d|s), [ε, 1−ε]로 클램핑"""
    return clamp_unit(marginal_cdf(model, s, a))
