"""
Named parameter storage with paired gradient accumulators.

Insertion order is the canonical order: it fixes the flat layout written to
checkpoints and the order optimizer moments are kept in.
"""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from ..errors import CheckpointError
from ..errors import NonFiniteError


@dataclass(eq=False)
class Parameter:
    """A float64 array and its gradient accumulator."""

    value: np.ndarray
    grad: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.value = np.asarray(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def size(self) -> int:
        return int(self.value.size)


class ParameterStore:
    """Ordered mapping from parameter name to ``Parameter``."""

    def __init__(self) -> None:
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, value: np.ndarray) -> Parameter:
        if name in self._params:
            raise ValueError(f"parameter {name!r} already registered")
        param = Parameter(value)
        self._params[name] = param
        return param

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[tuple[str, Parameter]]:
        return iter(self._params.items())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    @property
    def count(self) -> int:
        """Total number of scalar parameters."""
        return sum(p.size for p in self._params.values())

    def value(self, name: str) -> np.ndarray:
        return self._params[name].value

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.grad.fill(0.0)

    def flat_values(self) -> np.ndarray:
        """All values concatenated in canonical order."""
        if not self._params:
            return np.zeros(0)
        return np.concatenate([p.value.reshape(-1) for p in self._params.values()])

    def flat_grads(self) -> np.ndarray:
        if not self._params:
            return np.zeros(0)
        return np.concatenate([p.grad.reshape(-1) for p in self._params.values()])

    def load_flat(self, flat: np.ndarray) -> None:
        """
        Overwrite all values from a flat vector in canonical order.

        Raises:
            CheckpointError: If the vector length does not match
        """
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.count:
            raise CheckpointError(
                f"expected {self.count} parameter values, got {flat.size}"
            )
        offset = 0
        for param in self._params.values():
            param.value[...] = flat[offset : offset + param.size].reshape(param.value.shape)
            offset += param.size

    def check_finite(self) -> None:
        """Raise ``NonFiniteError`` naming the first non-finite parameter."""
        for name, param in self._params.items():
            if not np.all(np.isfinite(param.value)):
                raise NonFiniteError(f"parameter {name} is not finite")
