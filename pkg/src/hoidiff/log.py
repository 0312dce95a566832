"""
Structured logging setup.

The package logs through structlog. ``configure_logging`` is called once by the
CLI; library code only calls ``structlog.get_logger(__name__)``.
"""

from __future__ import annotations

import logging
import sys
from collections.abc import Callable
from typing import TYPE_CHECKING
from typing import Any

import structlog

if TYPE_CHECKING:
    from .config import Settings


def current_stderr_logger(*args: Any) -> structlog.PrintLogger:
    """Logger bound to whatever ``sys.stderr`` is at the time of the call."""
    return structlog.PrintLogger(file=sys.stderr)


def configure_logging(settings: Settings) -> None:
    """Configure structlog from environment settings."""
    level = logging.getLevelName(settings.log_level)

    processors: list[structlog.typing.Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.processors.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
    ]
    if settings.log_format == "structured":
        processors.append(structlog.processors.JSONRenderer(sort_keys=True))
    else:
        processors.append(structlog.dev.ConsoleRenderer(colors=False))

    logger_factory: Callable[..., Any]
    if settings.log_file:
        settings.log_file.parent.mkdir(parents=True, exist_ok=True)
        logger_factory = structlog.PrintLoggerFactory(
            file=settings.log_file.open("a", encoding="utf-8")
        )
    else:
        logger_factory = current_stderr_logger

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=logger_factory,
        cache_logger_on_first_use=False,
    )
