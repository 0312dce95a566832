"""
Metrics report writers: a plain-text table and a machine-readable key-value file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path

import jinja2

from ..inference.metrics import MetricsReport
from .base import BaseBuilder
from .base import RenderError


@dataclass
class EvaluationPayload:
    """Named metric reports of one evaluation (e.g. ``model`` and ``prior_only``)."""

    reports: dict[str, MetricsReport]
    meta: dict[str, str] = field(default_factory=dict)


def format_value(value: float | int) -> str:
    if isinstance(value, int):
        return str(value)
    if math.isnan(value):
        return "nan"
    return f"{value:.6f}"


class TableBuilder(BaseBuilder):
    """Plain-text metrics table rendered from a Jinja2 template."""

    default_base_name = "metrics"

    def __init__(
        self, payload: EvaluationPayload, output_dir: Path | str, base_name: str | None = None
    ) -> None:
        super().__init__(payload, output_dir, base_name)
        self.env = jinja2.Environment(
            loader=jinja2.FileSystemLoader(self.template_dir / self.get_format_name()),
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
            undefined=jinja2.StrictUndefined,
        )
        self.env.filters["metric"] = format_value

    def get_file_extension(self) -> str:
        return "txt"

    def get_format_name(self) -> str:
        return "table"

    def prepare_context(self) -> dict:
        reports = self.payload.reports
        names = list(reports)
        keys = list(next(iter(reports.values())).summary()) if reports else []
        rows = [(key, [reports[name].summary()[key] for name in names]) for key in keys]
        interactions = []
        for name in names:
            report = reports[name]
            for w, (p, r, f) in enumerate(
                zip(
                    report.interaction_precision,
                    report.interaction_recall,
                    report.interaction_f1,
                    strict=True,
                )
            ):
                interactions.append((name, w, p, r, f))
        width = max((len(k) for k in keys), default=8) + 2
        return {
            "meta": self.payload.meta,
            "names": names,
            "rows": rows,
            "interactions": interactions,
            "width": width,
        }

    def build(self) -> Path:
        self.validate_template("metrics.txt.j2")
        try:
            text = self.env.get_template("metrics.txt.j2").render(**self.prepare_context())
        except jinja2.TemplateError as e:
            raise RenderError(
                f"Failed to render metrics table: {e}", format_type=self.get_format_name()
            ) from e
        return self.write_text(self.get_output_path(), text)


class KeyValueBuilder(BaseBuilder):
    """``key=value`` lines, one metric per line, keys prefixed by report name."""

    default_base_name = "metrics"

    def get_file_extension(self) -> str:
        return "kv"

    def get_format_name(self) -> str:
        return "kv"

    def build(self) -> Path:
        lines = [f"meta.{key}={value}" for key, value in sorted(self.payload.meta.items())]
        for name, report in self.payload.reports.items():
            for key, value in report.flat(prefix=f"{name}.").items():
                lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
        return self.write_text(self.get_output_path(), "\n".join(lines) + "\n")


def read_key_values(path: Path) -> dict[str, str]:
    """Parse a key-value metrics file."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line and not line.startswith("#"):
            key, _, value = line.partition("=")
            out[key] = value
    return out
