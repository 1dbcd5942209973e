import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from pydantic import ValidationError

from commands import evaluate, export_copula, gen_data, rollout, train
from config import RunConfig, load_run_config, parse_override
from schemas.commons import TRAINABLE_COPULAS
from utils.errors import CopulaError

logger = logging.getLogger(__name__)

COMMANDS: dict[str, Callable[[RunConfig], object]] = {
    "gen-data": gen_data.run,
    "train": train.run,
    "eval": evaluate.run,
    "rollout": rollout.run,
    "export-copula": export_copula.run,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value 설정 파일")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path)
    common.add_argument("--copula", choices=[k.value for k in TRAINABLE_COPULAS])
    common.add_argument("--n-samples", type=int, dest="n_samples")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides",
                        help="설정 키 덮어쓰기 (반복 가능)")

    parser = argparse.ArgumentParser(prog="copula-il", description="코퓰라 분해 다중 에이전트 모방 학습")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = dict(parse_override(item) for item in args.overrides)
    # 전용 플래그가 --set 보다 우선
    flags = {"seed": args.seed, "out": args.out, "copula": args.copula, "n_samples": args.n_samples}
    overrides.update({k: v for k, v in flags.items() if v is not None})
    return load_run_config(args.config, overrides)


def exception_handler(exc: BaseException) -> int:
    if isinstance(exc, CopulaError):
        logger.error("%s: %s", type(exc).__name__, exc.detail)
        return exc.exit_code
    if isinstance(exc, ValidationError):
        logger.error("invalid configuration: %s", exc)
        return 2
    if isinstance(exc, OSError):
        logger.error("I/O error: %s", exc)
        return 2
    logger.error("unexpected failure: %s", exc, exc_info=True)
    return 1


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        logging.getLogger().setLevel(cfg.log_level.upper())
        COMMANDS[args.command](cfg)
    except Exception as exc:
        return exception_handler(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
