"""Shared exception types."""


class MopolError(Exception):
    """Base class for package errors."""


class ValidationError(MopolError):
    """Raised when inputs violate a documented contract."""


class FeasibilityError(MopolError):
    """Raised when an exact tree search would exceed the cost guard."""
