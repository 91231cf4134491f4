"""Exception types shared across the package.

CLI exit-code mapping: UsageError -> 1, DataError -> 2, NumericalError -> 3.
"""


class SplatError(Exception):
    """Base class for package errors."""


class UsageError(SplatError):
    """Bad arguments or configuration."""


class DataError(SplatError):
    """Malformed or inconsistent input data (files, images, datasets)."""


class NumericalError(SplatError):
    """Non-finite values detected during optimization."""
