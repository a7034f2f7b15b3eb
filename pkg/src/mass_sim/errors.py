"""Exception types shared across the package."""


class MassError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(MassError, ValueError):
    """A parameter is outside its documented domain."""


class InvalidIndexError(MassError, IndexError):
    """A node or agent index is out of range."""


class DegenerateInputError(MassError, ValueError):
    """Input is well-formed but carries no information for the computation."""
