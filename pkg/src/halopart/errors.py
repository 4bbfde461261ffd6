"""Shared exception types."""


class HalopartError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(HalopartError, ValueError):
    """Malformed input text (edge lists, assignment files, profile JSON)."""


class DomainError(HalopartError, ValueError):
    """Structurally valid input that violates an operation's preconditions."""
