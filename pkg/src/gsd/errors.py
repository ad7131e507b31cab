"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration/input problems exit 2,
missing prerequisites exit 3, runtime numerical failures exit 4.
"""


class GsdError(Exception):
    """Base class for all package errors."""


class ParseError(GsdError):
    """Malformed input file. Carries the offending line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(GsdError):
    """Invalid configuration or invalid argument combination."""


class InsufficientDataError(GsdError):
    """Input data too small to support the requested operation."""


class InfeasibleScenarioError(GsdError):
    """Scenario geometry cannot be realized (e.g. segment exceeds region)."""


class MissingPrerequisiteError(GsdError):
    """A required earlier stage (trained model, ingest output) is absent."""


class NumericalError(GsdError):
    """Training or evaluation produced non-finite values."""
