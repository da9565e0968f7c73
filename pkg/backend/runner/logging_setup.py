"""
Logging configuration for the entry points.

Library modules only call logging.getLogger(__name__); the CLI and the API
server install one stream handler with a bracketed-tag format:

    [backend.quantum.propagate] INFO: +Z: 10000 cycles, final fidelity 0.999731
"""

import logging
import sys
from typing import Optional

LOG_FORMAT = "[%(name)s] %(levelname)s: %(message)s"

_configured = False


def configure_logging(level: Optional[str] = None, stream=None) -> logging.Logger:
    """
    Install the root handler once; later calls only change the level.

    Args:
        level: level name; defaults to the configured logging.level
        stream: output stream (stderr by default so stdout stays clean)

    Returns:
        The root logger
    """
    global _configured
    if level is None:
        from config.simulation_config import get_simulation_config

        level = get_simulation_config().log_level

    root = logging.getLogger()
    if not _configured:
        handler = logging.StreamHandler(stream or sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
        _configured = True
    root.setLevel(getattr(logging, str(level).upper(), logging.INFO))
    return root
