"""Exception hierarchy shared by all modules."""


class DropAuditError(Exception):
    """Base class for every error raised by the package."""


class NumericalError(DropAuditError):
    """A numerical failure (rank loss, non-convergence)."""


class NotPositiveDefinite(NumericalError):
    pass


class RankDeficient(NotPositiveDefinite):
    """The selected rows do not give a full-column-rank design."""


class RankCollapse(NumericalError):
    """A rank-one downdate would leave a singular Gram matrix."""


class PivotalRow(NumericalError):
    """Some row has leverage numerically equal to one."""


class NoConvergence(NumericalError):
    pass


class DimensionMismatch(DropAuditError, ValueError):
    pass


class BudgetExceeded(DropAuditError):
    """Exhaustive enumeration would exceed the configured budget."""


class DataError(DropAuditError):
    """Problems with user-supplied tabular data."""


class MissingColumn(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NonFiniteValue(DataError, ValueError):
    def __init__(self, row, column, value=None):
        self.row = row
        self.column = column
        self.value = value
        what = "missing value" if value is None else f"non-finite or non-numeric value {value!r}"
        super().__init__(f"{what} at row {row!r}, column {column!r}")


class EmptyAfterDrops(DataError, ValueError):
    pass


class BoundError(DropAuditError, ValueError):
    """A bound was requested outside its admissible parameter range."""


class AlphaOutOfRange(BoundError):
    pass


class RhoTooLarge(BoundError):
    pass


class LeadingTermNonpositive(BoundError):
    pass


class ConditionViolated(BoundError):
    pass


class UnsupportedDistribution(BoundError):
    pass
