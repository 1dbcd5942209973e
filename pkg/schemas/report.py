from typing import Annotated

from pydantic import BaseModel, ConfigDict, Field, model_validator


class EvalReport(BaseModel):
    """평가 지표 하나 (반복 평균 ± 표준편차)"""
    model_config = ConfigDict(extra='forbid')

    metric: str
    label: str = ""
    value: float
    sd: Annotated[float, Field(ge=0.0)] = 0.0
    repetitions: Annotated[int, Field(ge=1)] = 1
    seeds: list[int] = Field(default_factory=list)
    fingerprint: str = ""
    n_samples: int | None = None

    @model_validator(mode='after')
    def single_run_has_no_spread(self):
        if self.repetitions == 1 and self.sd != 0.0:
            raise ValueError("반복이 1회면 sd는 0이어야 합니다")
        return self
