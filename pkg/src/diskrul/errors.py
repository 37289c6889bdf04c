"""Exception hierarchy.

Every error carries a ``category`` used by the command line to report
failures (``io``, ``schema``, ``domain``, ``numeric``).
"""


class DiskrulError(Exception):
    category = "domain"


class StoreIOError(DiskrulError, OSError):
    category = "io"


class SchemaError(DiskrulError, ValueError):
    category = "schema"


class DomainError(DiskrulError, ValueError):
    category = "domain"


class NumericError(DiskrulError, ArithmeticError):
    category = "numeric"


class TrainingError(NumericError):
    """Raised when training diverges; ``epoch`` is the failing epoch (1-based)."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
