"""은닉층 하나짜리 tanh MLP (해석적 역전파 + L2 SGD)"""
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from utils.errors import ConfigError, NumericalError, ShapeError, TrainingDivergedError

PARAM_NAMES = ("w1", "b1", "w2", "b2")


@dataclass(frozen=True)
class Layout:
    n_in: int
    n_hidden: int
    n_out: int

    def as_tuple(self) -> tuple[int, int, int]:
        return self.n_in, self.n_hidden, self.n_out


def _shapes(layout: Layout) -> dict[str, tuple[int, ...]]:
    return {
        "w1": (layout.n_hidden, layout.n_in),
        "b1": (layout.n_hidden,),
        "w2": (layout.n_out, layout.n_hidden),
        "b2": (layout.n_out,),
    }


@dataclass(frozen=True)
class NetworkParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ShapeError("weight matrices must be 2-D")
        for name, shape in _shapes(self.layout).items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if not all(np.all(np.isfinite(getattr(self, n))) for n in PARAM_NAMES):
            raise NumericalError("network parameters must be finite")

    @property
    def layout(self) -> Layout:
        return Layout(self.w1.shape[1], self.w1.shape[0], self.w2.shape[0])

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, n) for n in PARAM_NAMES)


@dataclass(frozen=True)
class GradientSet:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, n) for n in PARAM_NAMES)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def mlp_init(layout: Sequence[int] | Layout, seed: int) -> NetworkParams:
    """fan-in 스케일 균등분포 가중치, 편향 0"""
    if not isinstance(layout, Layout):
        if len(layout) != 3:
            raise ConfigError("layout must be (input, hidden, output)")
        layout = Layout(*(int(v) for v in layout))
    if min(layout.as_tuple()) < 1:
        raise ConfigError(f"invalid layer sizes {layout.as_tuple()}")

    rng = np.random.default_rng(seed)
    bound1 = 1.0 / np.sqrt(layout.n_in)
    bound2 = 1.0 / np.sqrt(layout.n_hidden)
    return NetworkParams(
        w1=rng.uniform(-bound1, bound1, size=(layout.n_hidden, layout.n_in)),
        b1=np.zeros(layout.n_hidden),
        w2=rng.uniform(-bound2, bound2, size=(layout.n_out, layout.n_hidden)),
        b2=np.zeros(layout.n_out),
    )


def _check_input(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] != params.layout.n_in:
        raise ShapeError(f"input shape {x.shape} does not match input size {params.layout.n_in}")
    return x


def _hidden(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    return np.tanh(x @ params.w1.T + params.b1)


def mlp_forward(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """W2·tanh(W1·x + b1) + b2 (x는 벡터 또는 행 단위 배치)"""
    x = _check_input(params, x)
    return _hidden(params, x) @ params.w2.T + params.b2


def mlp_backward(params: NetworkParams, x: np.ndarray, grad_out: np.ndarray) -> GradientSet:
    """output·grad_out 의 파라미터 그래디언트 (배치면 행 합)"""
    x = _check_input(params, x)
    grad_out = np.asarray(grad_out, dtype=float)
    if grad_out.ndim != x.ndim or grad_out.shape[-1] != params.layout.n_out \
            or (x.ndim == 2 and grad_out.shape[0] != x.shape[0]):
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match output size {params.layout.n_out}")

    xb = np.atleast_2d(x)
    gb = np.atleast_2d(grad_out)
    h = _hidden(params, xb)
    dh = (gb @ params.w2) * (1.0 - h * h)
    return GradientSet(
        w1=dh.T @ xb,
        b1=dh.sum(axis=0),
        w2=gb.T @ h,
        b2=gb.sum(axis=0),
    )


def sgd_step(params: NetworkParams, grads: GradientSet, lr: float, l2: float, stage: str = "sgd",
             epoch: int = 0) -> NetworkParams:
    """p ← p − lr·(g + l2·p), 편향은 L2 제외"""
    if lr <= 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    if l2 < 0:
        raise ConfigError(f"l2 weight must be non-negative, got {l2}")
    if not grads.is_finite():
        raise TrainingDivergedError(stage, epoch, "non-finite gradient")
    return replace(
        params,
        w1=params.w1 - lr * (grads.w1 + l2 * params.w1),
        b1=params.b1 - lr * grads.b1,
        w2=params.w2 - lr * (grads.w2 + l2 * params.w2),
        b2=params.b2 - lr * grads.b2,
    )
