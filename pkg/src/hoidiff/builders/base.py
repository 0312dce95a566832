"""
Base builder framework for run artifacts.

Every file a command writes (metrics tables, key-value metrics, detection
results, trajectory pixmaps and value dumps) comes from a builder, so output
paths, directory creation and error reporting behave the same for all
formats.
"""

from __future__ import annotations

import os
from abc import ABC
from abc import abstractmethod
from pathlib import Path
from typing import Any

from ..config import TEMPLATES_DIR
from ..errors import HoiDiffError


class BuilderError(HoiDiffError):
    """Base exception for builder errors."""

    def __init__(self, message: str, format_type: str | None = None) -> None:
        self.format_type = format_type
        super().__init__(message, format_type=format_type)


class TemplateError(BuilderError):
    """Template-related errors."""

    def __init__(
        self,
        message: str,
        template_path: Path | None = None,
        format_type: str | None = None,
    ) -> None:
        self.template_path = template_path
        super().__init__(message, format_type)


class RenderError(BuilderError):
    """Rendering/writing errors."""

    def __init__(
        self,
        message: str,
        output_path: Path | None = None,
        format_type: str | None = None,
    ) -> None:
        self.output_path = output_path
        super().__init__(message, format_type)


class BaseBuilder(ABC):
    """Writes one payload in one format below ``output_dir``."""

    default_base_name = "output"

    def __init__(
        self,
        payload: Any,
        output_dir: Path | str,
        base_name: str | None = None,
    ) -> None:
        self.payload = payload
        self.output_dir = Path(output_dir)
        self.base_name = base_name or self.default_base_name
        self.template_dir = TEMPLATES_DIR

    @abstractmethod
    def build(self) -> Path:
        """Write the artifact and return its path.

        Raises:
            TemplateError: If a template is missing or invalid
            RenderError: If writing fails
        """

    @abstractmethod
    def get_file_extension(self) -> str:
        """File extension without the dot (e.g. 'tsv', 'ppm')."""

    @abstractmethod
    def get_format_name(self) -> str:
        """Format name as registered with the factory."""

    def validate_template(self, template_name: str) -> Path:
        """Return the path of ``templates/<format>/<template_name>``.

        Raises:
            TemplateError: If the template is not a file
        """
        template_path = self.template_dir / self.get_format_name() / template_name
        if not template_path.is_file():
            raise TemplateError(
                f"Template not found: {template_path.name} in {template_path.parent}",
                template_path=template_path,
                format_type=self.get_format_name(),
            )
        return template_path

    def ensure_output_directory(self, output_path: Path) -> None:
        """Create the parent of ``output_path``.

        Raises:
            RenderError: If directory creation fails
        """
        try:
            output_path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise RenderError(
                f"Failed to create output directory: {output_path.parent}",
                output_path=output_path,
                format_type=self.get_format_name(),
            ) from e

    def get_output_filename(self, base_name: str | None = None) -> str:
        return f"{base_name or self.base_name}.{self.get_file_extension()}"

    def get_output_path(self, base_name: str | None = None) -> Path:
        return self.output_dir / self.get_output_filename(base_name)

    def write_bytes(self, output_path: Path, data: bytes) -> Path:
        """Write ``data`` via a temporary file and an atomic rename.

        Raises:
            RenderError: If the file cannot be written
        """
        self.ensure_output_directory(output_path)
        tmp = output_path.with_name(output_path.name + ".tmp")
        try:
            tmp.write_bytes(data)
            os.replace(tmp, output_path)
        except OSError as e:
            raise RenderError(
                f"Failed to write {output_path}: {e}",
                output_path=output_path,
                format_type=self.get_format_name(),
            ) from e
        return output_path

    def write_text(self, output_path: Path, text: str) -> Path:
        return self.write_bytes(output_path, text.encode("utf-8"))

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(format={self.get_format_name()}, dir={self.output_dir})"
