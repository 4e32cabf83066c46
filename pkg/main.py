import logging
import sys
from typing import Optional

from config import app_config
from handlers import build_parser
from services.errors import ConfigError, StageError


def setup_logging(level: str, log_file: Optional[str] = None) -> None:
    """Логи в stderr и, если задан LOG_FILE, в файл. stdout остаётся под вывод стадий"""
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


logger = logging.getLogger(__name__)


def main(argv: Optional[list[str]] = None) -> int:
    """
    Точка входа CLI

    Коды выхода: 0 - успех, 1 - ошибка стадии, 2 - ошибка использования
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.log_level or app_config.LOG_LEVEL, app_config.LOG_FILE)
    logger.debug(f"⚙️ Команда: {args.command}")

    try:
        return args.handler(args, parser)
    except SystemExit as e:
        # parser.error внутри обработчика
        return int(e.code or 0)
    except ConfigError as e:
        logger.error(f"❌ {e}")
        print(f"ecomigrate: error: {e}", file=sys.stderr)
        return 2
    except StageError as e:
        logger.error(f"❌ {e}")
        return 1
    except KeyboardInterrupt:
        logger.info("⏹️ Остановлено пользователем")
        return 130


if __name__ == "__main__":
    sys.exit(main())
