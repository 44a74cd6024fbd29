"""Exception hierarchy shared across the package.

Exit-code mapping for the CLI: data problems exit 1, configuration problems
exit 2, numeric failures exit 3.
"""

from __future__ import annotations


class AdapterError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DataError(AdapterError):
    """Malformed, missing, or inconsistent input data."""

    exit_code = 1


class FeatureNotFoundError(DataError, KeyError):
    """A requested key is absent from the feature store."""

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return Exception.__str__(self)


class StoreCorruptionError(DataError):
    """A stored record failed its shape, dtype, length, or checksum check."""


class ConfigError(AdapterError):
    """Invalid configuration or incompatible settings."""

    exit_code = 2


class ContractError(ConfigError):
    """A call violated an API contract (shape/width mismatch, missing label)."""


class BackendUnavailableError(ConfigError):
    """The requested encoder backend cannot be constructed in this environment."""


class IncompatibleCheckpointError(ConfigError):
    """Checkpoint architecture does not match its recorded configuration."""


class NumericError(AdapterError):
    """A computation produced non-finite values or an invalid numeric state."""

    exit_code = 3
