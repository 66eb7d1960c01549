"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration/parameter problems exit
with 2 (usage error), everything else with 1 (data or runtime failure).
"""


class DriftselError(Exception):
    """Base class for all package errors."""


class ParameterError(DriftselError):
    """An operation was called with invalid parameters."""


class ConfigError(DriftselError):
    """A configuration file or option set is invalid."""


class RecordFormatError(DriftselError):
    """A record file contains malformed rows.

    ``diagnostics`` is a list of (line_number, message) pairs, 1-based.
    """

    def __init__(self, message: str, diagnostics=()):
        self.diagnostics = list(diagnostics)
        if self.diagnostics:
            details = "; ".join(f"line {n}: {m}" for n, m in self.diagnostics)
            message = f"{message} ({details})"
        super().__init__(message)


class ScalingError(DriftselError):
    """Cross-corpus scaling could not be estimated."""


class SeriesTooSmallError(DriftselError):
    """A time series has too few tokens or bins for the requested operation."""


class DegenerateSeriesError(DriftselError):
    """A time series collapsed to something the operation cannot handle."""


class TrainingError(DriftselError):
    """Classifier training failed (for example the loss diverged)."""
