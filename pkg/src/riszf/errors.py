"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Scenario parameters are inconsistent, out of range, or mis-shaped."""


class NumericalError(RuntimeError):
    """A numerical routine failed (singular system, lost positive definiteness)."""
