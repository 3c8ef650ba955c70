"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, CapExceededError -> 3,
InvariantViolation -> 4.
"""


class ConfigError(ValueError):
    """An experiment configuration failed schema validation."""


class CapExceededError(RuntimeError):
    """An enumeration or search exceeded its configured cap."""


class InvariantViolation(RuntimeError):
    """A runtime self-check failed (for example a statistically impossible result)."""
