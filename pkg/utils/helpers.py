import logging
import sys
from typing import Optional

from pythonjsonlogger.json import JsonFormatter

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"
PLAIN_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def configure_logging(level: str = "INFO", plain: bool = False,
                      stream: Optional[object] = None) -> logging.Logger:
    """
    Root logger setup for the command line. Records go to stderr as one JSON
    object per line (extra= fields become keys); `plain` switches to text.
    Calling it again replaces the previous handler.
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_wfps_handler", False):
            root.removeHandler(handler)

    handler = logging.StreamHandler(stream or sys.stderr)
    handler._wfps_handler = True
    if plain:
        handler.setFormatter(logging.Formatter(PLAIN_FORMAT))
    else:
        handler.setFormatter(JsonFormatter(LOG_FORMAT, rename_fields={"levelname": "level"}))
    root.addHandler(handler)
    root.setLevel(level.upper())
    return root
