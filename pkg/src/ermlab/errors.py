"""Exception types raised across the package."""


class ErmlabError(Exception):
    """Base class for all package errors."""


class InvalidMeasureError(ErmlabError, ValueError):
    pass


class DimensionError(ErmlabError, ValueError):
    pass


class EmptyClassError(ErmlabError, ValueError):
    pass


class UnsupportedOperationError(ErmlabError, TypeError):
    """Raised when an oracle-backed hull lacks the capability an operation needs."""


class ResourceError(ErmlabError, RuntimeError):
    """Raised when exact enumeration would exceed the desk-scale budget."""


class PreconditionError(ErmlabError, ValueError):
    pass


class GridError(ErmlabError, ValueError):
    pass


class InclusionError(ErmlabError, ValueError):
    """A nested model sequence is not ordered by inclusion."""

    def __init__(self, message, class_index=None, member_index=None):
        super().__init__(message)
        self.class_index = class_index
        self.member_index = member_index
