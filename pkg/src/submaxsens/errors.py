"""Exception and warning types shared across the package."""


class SubmaxError(Exception):
    """Base class for all package errors."""


class DataValidationError(SubmaxError, ValueError):
    """Raised when input rows do not match the expected schema."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DegenerateStatistic(SubmaxError, ArithmeticError):
    """A statistic is undefined for the given data."""


class DegenerateScale(DegenerateStatistic):
    """The median absolute difference used for scaling is zero."""

    def __init__(self, group=None):
        self.group = group
        if group is None:
            msg = "pooled median |d| is zero (more than half of all differences are zero)"
        else:
            msg = f"median |d| within group {group} is zero"
        super().__init__(msg)


class EmptyGroup(DegenerateStatistic):
    """A group has no pairs but its within-group median is required."""

    def __init__(self, group):
        self.group = group
        super().__init__(f"group {group} has no pairs")


class DegenerateVariance(DegenerateStatistic):
    """A comparison (or deviate) has zero null variance."""

    def __init__(self, comparison=None):
        self.comparison = comparison
        where = "" if comparison is None else f" for comparison {comparison!r}"
        super().__init__(f"null variance is zero{where}")


class NumericalError(SubmaxError, RuntimeError):
    """The multivariate normal solver failed (invalid correlation, bracket failure)."""


class SmallGroupWarning(UserWarning):
    """A group entering a comparison is small for the normal approximation."""


class DroppedComparisonWarning(UserWarning):
    """A comparison selects only empty groups and was removed."""
