from __future__ import annotations

import contextlib
import os

from .errors import ArgumentError, CapacityError

DEFAULT_MAX_QUBITS = 14
ENV_MAX_QUBITS = "QLC0_MAX_QUBITS"

_override: int | None = None


def max_qubits() -> int:
    """Current qubit ceiling: explicit override, then environment, then default."""
    if _override is not None:
        return _override
    env = os.environ.get(ENV_MAX_QUBITS)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ArgumentError(f"{ENV_MAX_QUBITS} must be an integer, got {env!r}") from None
        if value < 1:
            raise ArgumentError(f"{ENV_MAX_QUBITS} must be positive")
        return value
    return DEFAULT_MAX_QUBITS


def set_max_qubits(value: int | None) -> None:
    global _override
    if value is not None and value < 1:
        raise ArgumentError("max qubits must be positive")
    _override = value


@contextlib.contextmanager
def qubit_limit(value: int | None):
    """Temporarily change the ceiling (used by tests and the CLI flag); ``None`` keeps it."""
    global _override
    previous = _override
    if value is not None:
        set_max_qubits(value)
    try:
        yield
    finally:
        _override = previous


def check_capacity(qubits: int, what: str = "operator") -> None:
    limit = max_qubits()
    if qubits > limit:
        raise CapacityError(f"{what} needs {qubits} qubits, limit is {limit}")
