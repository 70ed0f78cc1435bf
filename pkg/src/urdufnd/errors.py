"""Shared exception bases. CLI exit codes key off these."""


class UrduFndError(Exception):
    """Base class for all package errors."""


class DataError(UrduFndError):
    """Invalid or inconsistent input data (CLI exit code 2)."""


class ProtocolError(UrduFndError):
    """External scorer protocol failure (CLI exit code 3)."""
