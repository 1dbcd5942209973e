import numpy as np

from envs.dataset import Dataset
from models.copula import GaussianCopula
from models.marginal import MarginalModel, agent_coords_from_dims
from models.nn import NetworkParams
from models.policy import CopulaPolicy


def constant_network(n_in: int, n_out: int, b2, hidden: int = 3) -> NetworkParams:
    """가중치가 모두 0이라 출력이 항상 b2인 네트워크"""
    return NetworkParams(
        w1=np.zeros((hidden, n_in)), b1=np.zeros(hidden),
        w2=np.zeros((n_out, hidden)), b2=np.asarray(b2, dtype=float),
    )


def standard_normal_marginals(dim: int = 2, state_dim: int = 1, shift: float = 0.0) -> MarginalModel:
    """모든 좌표가 N(shift, 1)인 단일 성분 주변 모델"""
    return MarginalModel(
        net=constant_network(state_dim, dim, np.full(dim, shift)),
        log_spread=np.zeros(dim),
        n_components=1,
        agent_coords=agent_coords_from_dims([1] * dim),
        fitted=True,
    )


def gaussian_policy(rho: float, shift: float = 0.0) -> CopulaPolicy:
    """N(0,1) 주변 + 상관 rho 가우시안 코퓰라 = 이변량 정규"""
    return CopulaPolicy(
        marginal=standard_normal_marginals(shift=shift),
        copula=GaussianCopula(np.array([[1.0, rho], [rho, 1.0]])),
    )


def correlated_dataset(n: int, rho: float, seed: int, scale: float = 0.3) -> Dataset:
    """상태와 무관한 상관 rho 이변량 정규 행동 (상태 1차원, 궤적 길이 50)"""
    rng = np.random.default_rng(seed)
    states = rng.uniform(-1.0, 1.0, size=(n, 1))
    actions = scale * rng.multivariate_normal([0.0, 0.0], [[1.0, rho], [rho, 1.0]], size=n)
    return Dataset.from_arrays(states, actions, agent_dims=[1, 1], lengths=[50] * (n // 50))
