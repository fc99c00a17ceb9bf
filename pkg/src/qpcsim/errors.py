"""Error types shared across the package."""


class ConfigError(ValueError):
    """A scenario or config document is invalid; the message names the field."""


class UsageError(ValueError):
    """A command was invoked in a way its contract forbids."""
