"""
Configuration management for the HOI image diffusion toolkit.

Two layers live here:

- ``Settings``: process environment (worker threads, logging) read with
  pydantic-settings from ``HOI_IDIFF_*`` variables and an optional ``.env``.
- Run configuration: a TOML file with one table per ``RunConfig`` section,
  plus ``section.key=value`` overrides from the command line.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any

import toml
from pydantic import Field
from pydantic import ValidationError
from pydantic import field_validator
from pydantic_settings import BaseSettings
from pydantic_settings import SettingsConfigDict

from .errors import ConfigError
from .models import RunConfig

# Project root (config.py lives in src/hoidiff/)
PROJECT_ROOT = Path(__file__).parent.parent.parent
SCHEMAS_DIR = PROJECT_ROOT / "schemas"
TEMPLATES_DIR = PROJECT_ROOT / "templates"
CONFIGS_DIR = PROJECT_ROOT / "configs"

RESOLVED_CONFIG_NAME = "resolved-config.toml"


class Settings(BaseSettings):
    """Process settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_prefix="HOI_IDIFF_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    threads: int = Field(
        default_factory=lambda: os.cpu_count() or 1,
        ge=1,
        description="Worker thread cap for parallel generation and sampling",
    )
    log_level: str = Field(
        default="WARNING",
        description="Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)",
    )
    log_format: str = Field(
        default="plain", description="Log format (structured, plain)"
    )
    log_file: Path | None = Field(
        default=None, description="Log file path (None for stderr only)"
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        valid_levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        v_upper = v.upper()
        if v_upper not in valid_levels:
            raise ValueError(f"Invalid log level: {v}. Valid levels: {valid_levels}")
        return v_upper

    @field_validator("log_format")
    @classmethod
    def validate_log_format(cls, v: str) -> str:
        """Validate log format."""
        if v not in {"structured", "plain"}:
            raise ValueError(f"Unsupported log format: {v}")
        return v


def parse_override(assignment: str) -> tuple[list[str], Any]:
    """
    Split ``section.key=value`` into a key path and a TOML-parsed value.

    Values that are not valid TOML scalars are kept as bare strings, so
    ``--set inference.mode=stochastic`` needs no quoting.

    Raises:
        ConfigError: If the assignment has no ``=`` or an empty key
    """
    key, sep, raw = assignment.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override must look like section.key=value, got {assignment!r}")
    try:
        value = toml.loads(f"v = {raw.strip()}")["v"]
    except toml.TomlDecodeError:
        value = raw.strip()
    return key.split("."), value


def apply_overrides(data: dict[str, Any], assignments: list[str]) -> dict[str, Any]:
    """Apply ``section.key=value`` assignments to a nested config mapping in place."""
    for assignment in assignments:
        path, value = parse_override(assignment)
        node = data
        for part in path[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"cannot override inside non-table key {part!r}")
            node = child
        node[path[-1]] = value
    return data


def build_run_config(data: dict[str, Any]) -> RunConfig:
    """Validate a config mapping, converting pydantic errors to ``ConfigError``."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
            for err in e.errors()
        )
        raise ConfigError(f"invalid run configuration: {details}") from e


def load_run_config(
    path: Path | None = None,
    overrides: list[str] | None = None,
) -> RunConfig:
    """
    Load a run configuration file and apply command-line overrides.

    Args:
        path: TOML file with one table per section; defaults only when None
        overrides: ``section.key=value`` assignments applied on top

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: If the file is missing, malformed or inconsistent
    """
    data: dict[str, Any] = {}
    if path is not None:
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = toml.load(path)
        except toml.TomlDecodeError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
    apply_overrides(data, overrides or [])
    return build_run_config(data)


def _drop_none(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _drop_none(v) for k, v in value.items() if v is not None}
    return value


def dump_run_config(cfg: RunConfig) -> str:
    """Render a RunConfig as TOML text (``None`` fields are omitted)."""
    return toml.dumps(_drop_none(cfg.model_dump(mode="json")))


def write_resolved_config(cfg: RunConfig, output_dir: Path) -> Path:
    """Echo the fully resolved config into an output directory."""
    output_dir.mkdir(parents=True, exist_ok=True)
    path = output_dir / RESOLVED_CONFIG_NAME
    path.write_text(dump_run_config(cfg), encoding="utf-8")
    return path


def example_config_text() -> str:
    """Default RunConfig as TOML, leaving section seeds to follow the master seed."""
    data = RunConfig().model_dump(mode="json")
    data["world"].pop("seed", None)
    data["train"].pop("seed", None)
    return toml.dumps(_drop_none(data))
