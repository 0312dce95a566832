"""
Artifact builders package.

Builders turn in-memory results (metric reports, detections, reverse
trajectories) into files. The factory keeps a registry of formats so new
writers can be added without touching the commands that use them.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import structlog

from .base import BaseBuilder
from .base import BuilderError
from .base import RenderError
from .base import TemplateError
from .report import EvaluationPayload
from .report import KeyValueBuilder
from .report import TableBuilder
from .results import ResultsBuilder
from .trajectory import PixmapBuilder
from .trajectory import ValuesBuilder

logger = structlog.get_logger(__name__)


class BuilderFactory:
    """Factory for creating artifact builders with dynamic registration."""

    _builders: dict[str, type[BaseBuilder]] = {}

    @classmethod
    def create_builder(
        cls,
        format_type: str,
        payload: Any,
        output_dir: Path | str,
        base_name: str | None = None,
    ) -> BaseBuilder:
        """Create a builder instance for the specified format.

        Args:
            format_type: Registered format name ('table', 'kv', 'results', 'ppm', 'values')
            payload: Object the builder writes
            output_dir: Directory where output files will be created
            base_name: Output file stem (the builder's default when omitted)

        Returns:
            Configured builder instance

        Raises:
            ValueError: If format_type is not supported
            BuilderError: If builder creation fails
        """
        if not format_type:
            raise ValueError("Format type cannot be empty")

        format_type = format_type.lower().strip()

        if format_type not in cls._builders:
            available = ", ".join(sorted(cls._builders.keys()))
            raise ValueError(
                f"Unknown format '{format_type}'. Available formats: {available or 'none registered'}"
            )

        try:
            builder_class = cls._builders[format_type]
            logger.debug("builder_created", format=format_type, builder=builder_class.__name__)
            return builder_class(payload, output_dir, base_name)
        except Exception as e:
            raise BuilderError(
                f"Failed to create {format_type} builder: {e}", format_type=format_type
            ) from e

    @classmethod
    def get_available_formats(cls) -> list[str]:
        return sorted(cls._builders.keys())

    @classmethod
    def register_builder(cls, format_type: str, builder_class: type[BaseBuilder]) -> None:
        """Register a builder class under a format name.

        Raises:
            ValueError: If format_type is empty or builder_class is not a BaseBuilder
        """
        if not format_type or not format_type.strip():
            raise ValueError("Format type cannot be empty")

        if not isinstance(builder_class, type) or not issubclass(builder_class, BaseBuilder):
            raise ValueError(
                f"Builder class must inherit from BaseBuilder, got {builder_class}"
            )

        format_type = format_type.lower().strip()
        if format_type in cls._builders:
            logger.warning(
                "builder_overridden",
                format=format_type,
                previous=cls._builders[format_type].__name__,
                builder=builder_class.__name__,
            )
        cls._builders[format_type] = builder_class


def get_supported_formats() -> list[str]:
    return BuilderFactory.get_available_formats()


def create_builder(
    format_type: str, payload: Any, output_dir: Path | str, base_name: str | None = None
) -> BaseBuilder:
    """Convenience wrapper around ``BuilderFactory.create_builder``."""
    return BuilderFactory.create_builder(format_type, payload, output_dir, base_name)


def build_artifact(
    format_type: str, payload: Any, output_dir: Path | str, base_name: str | None = None
) -> Path:
    """Create the builder for ``format_type`` and run it."""
    return create_builder(format_type, payload, output_dir, base_name).build()


def _register_core_builders() -> None:
    for format_type, builder_class in (
        ("table", TableBuilder),
        ("kv", KeyValueBuilder),
        ("results", ResultsBuilder),
        ("ppm", PixmapBuilder),
        ("values", ValuesBuilder),
    ):
        BuilderFactory.register_builder(format_type, builder_class)


_register_core_builders()


__all__ = [
    "BaseBuilder",
    "BuilderError",
    "BuilderFactory",
    "EvaluationPayload",
    "KeyValueBuilder",
    "PixmapBuilder",
    "RenderError",
    "ResultsBuilder",
    "TableBuilder",
    "TemplateError",
    "ValuesBuilder",
    "build_artifact",
    "create_builder",
    "get_supported_formats",
]
