class CbirecError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(CbirecError, ValueError):
    """Invalid experiment configuration or command-line arguments."""


class DataError(CbirecError, ValueError):
    """Malformed or unusable input data."""
