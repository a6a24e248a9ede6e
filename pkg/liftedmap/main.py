"""
Main entry point
Configures logging and maps engine errors to exit codes
"""
import sys
from typing import Optional

from pydantic import ValidationError

from liftedmap import __version__
from liftedmap.cli import dispatch
from liftedmap.core.config import settings
from liftedmap.core.exceptions import ConfigError, LiftedMapError
from liftedmap.core.logging import get_logger, setup_logging

logger = get_logger(__name__)


def main(argv: Optional[list[str]] = None) -> int:
    """
    Run one CLI command

    Exit codes: 0 success, 2 configuration or contract error,
    3 unreadable input, 4 internal failure.
    """
    setup_logging(settings.LOG_LEVEL, settings.LOG_JSON)
    argv = sys.argv[1:] if argv is None else argv
    logger.debug(f"Starting {settings.PROJECT_NAME} v{__version__}")
    try:
        return dispatch(argv)
    except LiftedMapError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return exc.exit_code
    except ValidationError as exc:
        error = ConfigError(str(exc))
        logger.error(f"ConfigError: {error}")
        return error.exit_code
    except Exception as exc:
        logger.error(f"Unhandled exception: {exc}", exc_info=True)
        return 4


if __name__ == "__main__":
    sys.exit(main())
