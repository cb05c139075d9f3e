import logging
import sys

from .config import ENVIRONMENT
from .config import LOGGING_DATEFORMAT
from .config import LOGGING_FILE
from .config import LOGGING_FORMAT
from .config import LOGGING_LEVEL

try:
    from rich.logging import RichHandler

    handler: logging.Handler = RichHandler(rich_tracebacks=True)
except ImportError:
    handler = logging.StreamHandler(sys.stderr)


logging.basicConfig(
    level=LOGGING_LEVEL,
    format=LOGGING_FORMAT,
    datefmt=LOGGING_DATEFORMAT,
    handlers=[handler],
)


def setup_logging(level: str | int = LOGGING_LEVEL, logfile: str | None = None):
    root = logging.getLogger()
    root.setLevel(level)

    # output logs to file in production
    if logfile is None and ENVIRONMENT == 'production':
        logfile = LOGGING_FILE
    if logfile is not None:
        file_handler = logging.FileHandler(logfile)
        file_handler.setFormatter(
            logging.Formatter(
                fmt='%(asctime)s [%(levelname)-8s] [%(name)s] %(message)s',
                datefmt=LOGGING_DATEFORMAT,
            )
        )
        root.addHandler(file_handler)
