"""Exception types shared across the package."""


class StateError(RuntimeError):
    """An operation is impossible in the current simulation state."""


class ParseError(ValueError):
    """A dataset file is malformed; the message carries the line number."""


class ConfigError(ValueError):
    """An experiment config is invalid; the message names the offending field."""
