import argparse
import logging
import sys
import traceback
from typing import Optional, Sequence

from .dependencies import CommandRouter
from .internal.errors import StreamTsneError
from .routers import baseline, run

# 獲取根日誌記錄器
logger = logging.getLogger()


def configure_logging(level: str = "INFO") -> None:
    # 配置日誌，輸出到標準輸出
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stdout)],
        force=True,
    )


def create_parser(routers: Sequence[CommandRouter]) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stream-tsne", description="Streaming t-SNE with PEDRUL anchors and ECS")
    subparsers = parser.add_subparsers(dest="command", required=True)
    # Include routers
    for router in routers:
        router.attach(subparsers)
    return parser


parser = create_parser([run.router, baseline.router])


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except StreamTsneError as e:
        logger.error(f"{type(e).__name__}: {e.detail}")
        return e.exit_code
    except Exception as e:
        logger.error(f"Run failed: {e}")
        logger.error(traceback.format_exc())
        return 1


if __name__ == "__main__":
    sys.exit(main())
