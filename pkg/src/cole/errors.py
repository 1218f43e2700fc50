"""Shared exception taxonomy; the CLI maps these to exit codes."""


class ColeError(Exception):
    """Base for all package errors."""
    exit_code = 1


class ConfigError(ColeError):
    """Bad configuration, unknown keys, or invalid CLI usage."""
    exit_code = 2


class DataError(ColeError):
    """Missing or malformed dataset/cache/checkpoint files."""
    exit_code = 3


class DivergenceError(ColeError):
    """Training produced a non-finite loss."""
    exit_code = 4
