from typing import Literal

from pydantic import BaseModel, ConfigDict

from schemas.commons import CopulaKind
from schemas.dataset import NormalizationRanges

MARGINAL_FORMAT = "copula-il/marginal/v1"
GMC_FORMAT = "copula-il/gmc/v1"
GAUSSIAN_FORMAT = "copula-il/gaussian-copula/v1"
INDEPENDENCE_FORMAT = "copula-il/independence/v1"
BUNDLE_FORMAT = "copula-il/bundle/v1"


class NetworkRecord(BaseModel):
    model_config = ConfigDict(extra='forbid')

    layout: tuple[int, int, int]
    activation: Literal["tanh"] = "tanh"
    w1: list[list[float]]
    b1: list[float]
    w2: list[list[float]]
    b2: list[float]


class MarginalRecord(BaseModel):
    model_config = ConfigDict(extra='forbid')

    format: Literal["copula-il/marginal/v1"] = MARGINAL_FORMAT
    n_components: int
    n_coords: int
    agent_coords: list[list[int]]
    log_spread: list[float]
    fitted: bool
    network: NetworkRecord
    normalization: NormalizationRanges | None = None


class GmcRecord(BaseModel):
    model_config = ConfigDict(extra='forbid')

    format: Literal["copula-il/gmc/v1"] = GMC_FORMAT
    n_components: int
    dim: int
    fitted: bool
    network: NetworkRecord


class GaussianCopulaRecord(BaseModel):
    model_config = ConfigDict(extra='forbid')

    format: Literal["copula-il/gaussian-copula/v1"] = GAUSSIAN_FORMAT
    corr: list[list[float]]


class IndependenceRecord(BaseModel):
    model_config = ConfigDict(extra='forbid')

    format: Literal["copula-il/independence/v1"] = INDEPENDENCE_FORMAT
    dim: int


class BundleManifest(BaseModel):
    model_config = ConfigDict(extra='forbid')

    format: Literal["copula-il/bundle/v1"] = BUNDLE_FORMAT
    version: int = 1
    copula_kind: CopulaKind
    dim: int
    n_components: int
    copula_components: int | None = None
    normalization: NormalizationRanges | None = None
    entries: list[str]
