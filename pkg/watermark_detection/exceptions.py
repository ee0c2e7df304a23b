"""Error hierarchy shared by every module.

Most errors subclass ValueError so callers that only care about bad input
can catch the builtin. The CLI maps ParameterError to a usage error (exit 2)
and every other WatermarkError to a runtime error (exit 1).
"""

from typing import Any


class WatermarkError(Exception):
    """Base class for all toolkit errors."""


class DistributionError(WatermarkError, ValueError):
    """Malformed probability vector or feature matrix."""


class CapacityError(WatermarkError, ValueError):
    """Vocabulary too small to hold the requested configuration."""


class ContractError(WatermarkError, ValueError):
    """A structural contract was violated (window length, token range, gamma*m)."""


class ParameterError(WatermarkError, ValueError):
    """A parameter is out of range or parameters are mutually inconsistent."""


class DegenerateSupportError(WatermarkError, ValueError):
    """The NTP distribution puts no mass on the list a sampler must draw from."""


class NumericalError(WatermarkError, ArithmeticError):
    """Quadrature or optimization failed to converge."""

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        return f"{base} ({details})"
