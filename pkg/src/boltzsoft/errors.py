"""Exception taxonomy shared by the numerical modules and the CLI."""

from __future__ import annotations


class BoltzsoftError(Exception):
    """Base class for all package errors."""


class InputError(BoltzsoftError, ValueError):
    """Malformed or inconsistent input (non-unit direction, grid mismatch, ...)."""


class DivergentIntegralError(BoltzsoftError, ValueError):
    """A requested singular integral does not converge."""


class SingularPointError(BoltzsoftError, ValueError):
    """A kernel was evaluated at its singular (coincident) point."""


class DegenerateInputError(BoltzsoftError, ValueError):
    """Input carries no usable information, e.g. a field that vanishes identically."""


class ConfigError(BoltzsoftError):
    """Configuration file could not be parsed or validated."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.key = key


class SolverDivergenceError(BoltzsoftError):
    """Picard iteration failed to converge; carries the iteration trace."""

    def __init__(self, message: str, trace=None, window: int | None = None):
        super().__init__(message)
        self.trace = trace
        self.window = window


class PositivityViolationError(BoltzsoftError):
    """A distribution or loss rate went negative beyond the configured tolerance."""

    def __init__(self, message: str, minimum: float = float("nan"), window: int | None = None):
        super().__init__(message)
        self.minimum = minimum
        self.window = window
