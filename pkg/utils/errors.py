class CopulaError(Exception):
    """CLI 종료 코드와 상세 메시지를 가진 기본 예외"""
    exit_code: int = 1

    def __init__(self, detail: str, exit_code: int | None = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class ConfigError(CopulaError):
    exit_code = 2


class ShapeError(ConfigError, ValueError):
    pass


class DomainError(ConfigError, ValueError):
    pass


class UsageError(ConfigError):
    pass


class NotFittedError(ConfigError):
    pass


class NotEnoughDataError(ConfigError):
    pass


class NumericalError(CopulaError):
    exit_code = 3


class TrainingDivergedError(NumericalError):
    def __init__(self, stage: str, epoch: int, detail: str = "non-finite loss"):
        super().__init__(f"training diverged in stage '{stage}' at epoch {epoch}: {detail}")
        self.stage = stage
        self.epoch = epoch


class RolloutDivergedError(NumericalError):
    def __init__(self, step: int):
        super().__init__(f"rollout diverged at step {step}: non-finite state")
        self.step = step


class InvalidScenarioError(NumericalError):
    pass
