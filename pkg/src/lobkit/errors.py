"""Exception hierarchy shared across the package."""


class LobkitError(Exception):
    """Base class for all package errors."""


class ConfigurationError(LobkitError):
    """Invalid model or run configuration."""


class DataFormatError(LobkitError):
    """Malformed or misaligned input data files."""


class NumericalBlowupError(LobkitError):
    """A simulated state became non-finite."""


class RunawayRateError(LobkitError):
    """An event-driven run exceeded its event cap."""
