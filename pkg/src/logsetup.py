import logging
import os
import sys
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = '%(asctime)s - %(levelname)-8s - %(message)s'
FILE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


# Custom log formatter with colors
class ColoredFormatter(logging.Formatter):
    """Custom formatter that adds colors to log levels"""

    COLORS = {
        'DEBUG': '\033[94m',  # Blue
        'INFO': '\033[92m',   # Green
        'WARNING': '\033[93m', # Yellow
        'ERROR': '\033[91m',  # Red
        'CRITICAL': '\033[91m\033[1m', # Bold Red
        'RESET': '\033[0m'    # Reset
    }

    def format(self, record):
        log_message = super().format(record)
        if record.levelname in self.COLORS:
            return f"{self.COLORS[record.levelname]}{log_message}{self.COLORS['RESET']}"
        return log_message


def env_threads() -> int:
    try:
        return max(1, int(os.getenv('PHOTONTOMO_THREADS', '1')))
    except ValueError:
        return 1


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None,
                  fmt: str = LOG_FORMAT) -> None:
    """Configure the root logger for command-line use.

    Args:
        level: Level name; falls back to PHOTONTOMO_LOG_LEVEL, then INFO.
        log_file: Optional path for a plain-text copy of the log; falls back to
            PHOTONTOMO_LOG_FILE.
        fmt: Console format string.
    """
    level = (level or os.getenv('PHOTONTOMO_LOG_LEVEL', 'INFO')).upper()
    log_file = log_file or os.getenv('PHOTONTOMO_LOG_FILE') or None

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(ColoredFormatter(fmt))
    handlers = [console_handler]

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
        handlers.append(file_handler)

    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        handlers=handlers,
        force=True
    )
