"""Exception types shared across the kit.

Validation problems discovered while *inspecting* a matrix are reported as
data (see ``core.validate``); exceptions are reserved for operations that
cannot proceed.
"""


class SpgemmKitError(Exception):
    """Base class for all kit errors."""


class IndexOutOfRange(SpgemmKitError):
    pass


class DuplicateEntry(SpgemmKitError):
    pass


class ParseError(SpgemmKitError):
    pass


class UnsupportedFormat(SpgemmKitError):
    pass


class DimensionMismatch(SpgemmKitError):
    pass


class TableFull(SpgemmKitError):
    """Linear probe cycled through every slot: the table was sized too small."""


class CapacityMismatch(SpgemmKitError):
    """Accumulation gathered a different entry count than allocation reserved."""


class PlanMismatch(SpgemmKitError):
    pass


class ResolverFailure(SpgemmKitError):
    pass


class BadConfig(SpgemmKitError):
    pass


class NegativeEntry(SpgemmKitError):
    pass


class NotSquare(SpgemmKitError):
    pass


class LabelOutOfRange(SpgemmKitError):
    pass


class DownloadError(SpgemmKitError):
    pass


class MismatchError(SpgemmKitError):
    """Expected-vs-actual mismatch while verifying corpus statistics."""

    def __init__(self, message, expected=None, actual=None):
        super().__init__(message)
        self.expected = expected
        self.actual = actual
