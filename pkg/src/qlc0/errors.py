"""Exception hierarchy shared by every module.

The CLI maps these onto exit statuses, so new error kinds should subclass
one of the two roots below rather than ``Exception`` directly.
"""

from __future__ import annotations


class Qlc0Error(Exception):
    """Base class for all errors raised by the package."""


class ValidationError(Qlc0Error, ValueError):
    """Malformed input: wrong shape, non-unitary gate, bad parameter range."""


class ArgumentError(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class NotPSDError(ValidationError):
    pass


class NormError(ValidationError):
    """Operator norm exceeds what a construction can accept."""


class InvalidInversionError(ValidationError):
    pass


class CapacityError(Qlc0Error):
    """A dense object would exceed the configured qubit ceiling."""


class InfeasibleError(Qlc0Error):
    """Requested accuracy needs more samples than the configured budget.

    ``required_samples`` carries the sample count that would have been needed.
    """

    def __init__(self, message: str, required_samples: int | None = None):
        super().__init__(message)
        self.required_samples = required_samples
