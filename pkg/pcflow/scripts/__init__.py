"""Shared logging setup for scripts.

This is not part of the main pcflow.__init__ as we don't want to configure
logging if pcflow is being used as a library.
"""

import logging
import os
from typing import Optional

import pcflow


class SamplerPhaseMixin(logging.Handler):
    """Include the sampler phase in the log record."""

    def emit(self, record):
        record.__setattr__("phase", pcflow.utils.CURRENT_PHASE.get())
        super().emit(record)


class SamplerPhaseStreamHandler(SamplerPhaseMixin, logging.StreamHandler):
    """Include the sampler phase when logging to a stream."""


class SamplerPhaseFileHandler(SamplerPhaseMixin, logging.FileHandler):
    """Include the sampler phase when logging to a file."""


def _log_level() -> int:
    return getattr(logging, pcflow.utils.EnvVarConstants.LOG_LEVEL.upper(), logging.DEBUG)


def _setup_handler(handler: logging.Handler, exe_name: str, root: str):
    format_str = f"{exe_name}: [%(asctime)s] [%(phase)s] [%(package)s:%(funcName)s] %(levelname)s - %(message)s"

    def log_filter(record: logging.LogRecord) -> logging.LogRecord:
        package = record.pathname[len(root) + 1 :]
        if package.endswith(".py"):
            package = package[:-3]
        record.package = package.replace(os.sep, ".")
        return record

    handler.setLevel(_log_level())
    handler.setFormatter(logging.Formatter(fmt=format_str))
    handler.addFilter(log_filter)
    return handler


def configure_logging(
    exe_name: str, logger_name: str = "pcflow", root: Optional[str] = None
):
    logger = logging.getLogger(logger_name)
    logger.setLevel(_log_level())
    root = os.path.dirname(os.path.dirname(pcflow.__file__)) if root is None else root
    logger.addHandler(_setup_handler(SamplerPhaseStreamHandler(), exe_name, root))
    return logger


def log_to_file(
    path: str,
    exe_name: str,
    logger_name: str = "pcflow",
    root: Optional[str] = None,
) -> logging.Handler:
    """Also write the log to `path`, typically inside the output directory."""
    root = os.path.dirname(os.path.dirname(pcflow.__file__)) if root is None else root
    handler = _setup_handler(SamplerPhaseFileHandler(filename=path), exe_name, root)
    logging.getLogger(logger_name).addHandler(handler)
    return handler
