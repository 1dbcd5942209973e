import json
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from utils.errors import ConfigError

M = TypeVar("M", bound=BaseModel)


def dump_json(model: BaseModel) -> str:
    # json.dumps는 float를 repr로 쓰므로 비트 단위 왕복 가능
    return json.dumps(model.model_dump(mode="json"), indent=2) + "\n"


def parse_json(text: str | bytes, schema: type[M], source: str) -> M:
    try:
        return schema.model_validate(json.loads(text))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: invalid JSON ({e.msg} at line {e.lineno})") from e
    except ValidationError as e:
        raise ConfigError(f"{source}: {e.error_count()} invalid field(s): {e.errors()[0]['msg']}") from e


def read_json(path: Path, schema: type[M]) -> M:
    with path.open("r", encoding="utf-8") as f:
        return parse_json(f.read(), schema, str(path))


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return path
