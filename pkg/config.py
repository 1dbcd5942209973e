import json
from pathlib import Path
from typing import Any

from pydantic import Field, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from schemas.commons import (
    AdjacencyMode, BandwidthRule, Components, CopulaKind, EnvTag, NonNegativeFloat, PositiveFloat, PositiveInt, Seed,
    Count, TRAINABLE_COPULAS,
)
from schemas.envs import DrivingConfig, PhySimConfig
from schemas.training import StageConfig, TrainConfig
from utils.errors import ConfigError

# 환경별 (학습률, L2) 기본값
ENV_DEFAULTS: dict[EnvTag, tuple[float, float]] = {
    EnvTag.PHYSIM: (0.01, 1e-5),
    EnvTag.DRIVING: (0.005, 1e-5),
    EnvTag.GENERIC: (0.001, 1e-6),
}


class RunConfig(BaseSettings):
    """평면 key=value 설정 파일 + CLI 덮어쓰기 (환경 변수는 읽지 않음)"""
    model_config = SettingsConfigDict(
        env_file_encoding="utf-8",
        extra="forbid",
        case_sensitive=False,
    )

    env: EnvTag = EnvTag.PHYSIM
    seed: Seed
    out: Path = Path("runs")
    log_level: str = "INFO"
    workers: PositiveInt = 1

    # 데이터
    data_dir: Path | None = None
    train_data: Path | None = None
    val_data: Path | None = None
    test_data: Path | None = None
    n_train: Count = 500
    n_val: Count = 100
    n_test: Count = 100
    horizon: PositiveInt = 100
    n_particles: PositiveInt = 5
    spring_k: PositiveFloat = 0.1
    noise_sd: NonNegativeFloat = 0.05
    dt: PositiveFloat = 0.1
    half_width: PositiveFloat = 0.5
    adjacency_mode: AdjacencyMode = AdjacencyMode.PER_STEP
    intervene_agent: Count | None = None
    intervene_factor: float = 2.0
    intervene_scale_noise: bool = False
    norm_reference: Path | None = None
    import_records: Path | None = None
    import_agent_dims: list[PositiveInt] | None = None
    import_state_dim: PositiveInt | None = None
    split_ratios: list[NonNegativeFloat] = Field(default_factory=lambda: [0.8, 0.1, 0.1])

    # 학습
    copula: CopulaKind = CopulaKind.KDE
    n_components: Components = 2
    copula_components: Components = 4
    hidden: PositiveInt = 64
    copula_hidden: PositiveInt = 64
    lr: PositiveFloat | None = None
    l2: NonNegativeFloat | None = None
    copula_lr: PositiveFloat | None = None
    copula_l2: NonNegativeFloat | None = None
    epochs: Count = 200
    copula_epochs: Count = 100
    batch_size: PositiveInt = 128
    tol: PositiveFloat = 1e-4
    patience: PositiveInt = 1
    variance_scaled: bool = True
    kde_bandwidth: str = BandwidthRule.SCOTT.value
    kde_max_points: PositiveInt = 20_000
    policy: Path | None = None

    # 평가 / 생성 / 내보내기
    metrics: list[str] = Field(default_factory=lambda: ["rmse", "nll"])
    n_samples: PositiveInt = 100
    eval_seeds: list[Seed] = Field(default_factory=lambda: [0, 1, 2])
    baseline_policy: Path | None = None
    new_policy: Path | None = None
    new_test_data: Path | None = None
    rollout_length: Count = 100
    rollout_starts: PositiveInt = 1
    rollout_samples: PositiveInt = 1
    grid_pairs: list[tuple[Count, Count]] = Field(default_factory=lambda: [(0, 1)])
    grid_resolution: PositiveInt = 50
    grid_state_index: Count | None = None

    @classmethod
    def settings_customise_sources(
            cls,
            settings_cls: type[BaseSettings],
            init_settings: PydanticBaseSettingsSource,
            env_settings: PydanticBaseSettingsSource,
            dotenv_settings: PydanticBaseSettingsSource,
            file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return init_settings, dotenv_settings

    @model_validator(mode='after')
    def check_values(self):
        if len(self.split_ratios) != 3 or sum(self.split_ratios) <= 0:
            raise ValueError("split_ratios는 train/val/test 세 값이어야 합니다")
        if self.copula not in TRAINABLE_COPULAS:
            raise ValueError(f"copula는 {', '.join(k.value for k in TRAINABLE_COPULAS)} 중 하나여야 합니다")
        unknown = set(self.metrics) - {"rmse", "rmse_single", "nll", "swap", "bootstrap"}
        if unknown:
            raise ValueError(f"알 수 없는 지표: {sorted(unknown)}")
        if self.kde_bandwidth not in {r.value for r in BandwidthRule}:
            try:
                float(self.kde_bandwidth)
            except ValueError:
                raise ValueError("kde_bandwidth는 scott, silverman 또는 양수여야 합니다") from None
        return self

    # ---------- 파생 값 ----------

    def dataset_path(self, split: str) -> Path:
        explicit = {"train": self.train_data, "val": self.val_data, "test": self.test_data}.get(split)
        if explicit is not None:
            return explicit
        return (self.data_dir or self.out / "data") / split

    @property
    def policy_path(self) -> Path:
        return self.policy or self.out / "policy.zip"

    def stage_defaults(self, tag: EnvTag | None = None) -> tuple[float, float]:
        lr, l2 = ENV_DEFAULTS[tag or self.env]
        return (self.lr if self.lr is not None else lr), (self.l2 if self.l2 is not None else l2)


def env_config(cfg: RunConfig) -> PhySimConfig | DrivingConfig:
    if cfg.env == EnvTag.PHYSIM:
        return PhySimConfig(n_particles=cfg.n_particles, spring_k=cfg.spring_k, noise_sd=cfg.noise_sd, dt=cfg.dt,
                            half_width=cfg.half_width, adjacency_mode=cfg.adjacency_mode)
    if cfg.env == EnvTag.DRIVING:
        return DrivingConfig(noise_sd=cfg.noise_sd, dt=cfg.dt)
    raise ConfigError("the generic environment has no simulator; import records instead")


def to_train_config(cfg: RunConfig, tag: EnvTag | None = None) -> TrainConfig:
    lr, l2 = cfg.stage_defaults(tag)
    common = dict(batch_size=cfg.batch_size, tol=cfg.tol, patience=cfg.patience, variance_scaled=cfg.variance_scaled)
    bandwidth: BandwidthRule | float
    if cfg.kde_bandwidth in {r.value for r in BandwidthRule}:
        bandwidth = BandwidthRule(cfg.kde_bandwidth)
    else:
        bandwidth = float(cfg.kde_bandwidth)
    return TrainConfig(
        copula=cfg.copula,
        n_components=cfg.n_components,
        copula_components=cfg.copula_components,
        hidden=cfg.hidden,
        copula_hidden=cfg.copula_hidden,
        marginal=StageConfig(lr=lr, l2=l2, epochs=cfg.epochs, **common),
        copula_stage=StageConfig(
            lr=cfg.copula_lr if cfg.copula_lr is not None else lr,
            l2=cfg.copula_l2 if cfg.copula_l2 is not None else l2,
            epochs=cfg.copula_epochs, **common,
        ),
        kde_bandwidth=bandwidth,
        kde_max_points=cfg.kde_max_points,
        seed=cfg.seed,
    )


def parse_override(item: str) -> tuple[str, Any]:
    """--set key=value (리스트/객체 값은 JSON)"""
    key, sep, raw = item.partition("=")
    key = key.strip().lower()
    if not sep or not key:
        raise ConfigError(f"override '{item}' is not key=value")
    if key not in RunConfig.model_fields:
        raise ConfigError(f"unknown configuration key '{key}'")
    raw = raw.strip()
    if raw[:1] in "[{":
        try:
            return key, json.loads(raw)
        except json.JSONDecodeError as e:
            raise ConfigError(f"override '{key}' is not valid JSON") from e
    return key, raw


def load_run_config(path: Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if path is not None and not Path(path).is_file():
        raise ConfigError(f"config file {path} does not exist")
    return RunConfig(_env_file=path, **overrides)


def _render_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(cfg: RunConfig) -> str:
    """key=value 텍스트 (None 항목은 생략)"""
    dumped = cfg.model_dump(mode="json")
    lines = [f"{key}={_render_value(dumped[key])}" for key in RunConfig.model_fields if dumped[key] is not None]
    return "\n".join(lines) + "\n"
