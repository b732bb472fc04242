"""
Exception hierarchy for the chirplet separation toolkit.
"""


class CT3SError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(CT3SError, ValueError):
    """An argument is outside its admissible range."""


class DomainError(CT3SError, ValueError):
    """A time instant or grid lies outside the span of a model or signal."""


class GridError(CT3SError, ValueError, IndexError):
    """Transform axes are malformed or an index is out of range."""


class SeparationError(CT3SError):
    """Ridge retrieval produced nothing (every threshold set was empty)."""
