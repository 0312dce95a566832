"""
Named ablations, each expressed purely as config overrides.
"""

from __future__ import annotations

from .errors import ConfigError

ABLATIONS: dict[str, list[str]] = {
    "gaussian-process": ["schedule.process=gaussian"],
    "unnormalized-process": ["schedule.process=unnormalized"],
    "uniform-init": ["inference.init_mode=uniform"],
    "init-as-condition": ["model.condition_on_init=true"],
    "local-patch": ["model.patch_mode=local"],
    "horizontal-only": ["model.patch_mode=horizontal"],
    "vertical-only": ["model.patch_mode=vertical"],
}


def ablation_overrides(names: list[str]) -> list[str]:
    """
    ``--set`` style assignments for the given ablation names, in order.

    Raises:
        ConfigError: If a name is unknown
    """
    assignments: list[str] = []
    for name in names:
        key = name.strip().lower()
        if key not in ABLATIONS:
            available = ", ".join(sorted(ABLATIONS))
            raise ConfigError(f"unknown ablation {name!r}; available: {available}")
        assignments.extend(ABLATIONS[key])
    return assignments
