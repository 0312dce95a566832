"""
Parameter storage and hand-differentiated primitives.
"""

from __future__ import annotations

from .parameters import Parameter
from .parameters import ParameterStore

__all__ = ["Parameter", "ParameterStore"]
