"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or configuration file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OutOfReachError(ValueError):
    """Foot target the leg cannot reach; ``nearest`` is the closest reachable point."""

    def __init__(self, message, nearest=None):
        super().__init__(message)
        self.nearest = nearest


class SimulationDiverged(RuntimeError):
    """Non-finite simulator state."""


class PolicyError(ValueError):
    pass


class FormatError(ValueError):
    """Unreadable or malformed artifact file (checkpoint, terrain dump, log)."""
