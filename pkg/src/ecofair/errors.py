"""Exception hierarchy shared by all ecofair modules."""


class EcofairError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateRate(EcofairError):
    """A rate of exactly 0 or 1 makes the requested correlation undefined."""


class InfeasibleCorrelation(EcofairError):
    """A Pearson coefficient lies outside its Frechet feasibility interval."""


class InvalidOverlap(EcofairError):
    """An overlap profile violates gamma1 + gamma2 - gamma_both = 1 or bounds."""


class InvalidDistribution(EcofairError):
    """A constructed pmf has negative cells or does not sum to one."""


class EmptySample(EcofairError):
    """A sample of size zero was requested."""


class EmptyGroup(EcofairError):
    """A (group, label) stratum needed by a metric has no rows."""


class DegenerateVariance(EcofairError):
    """A lender's predictions are constant on a stratum; correlation undefined."""


class UnfittableStratum(EcofairError):
    """A stratum required to fit a derived policy is empty."""


class SingularFit(EcofairError):
    """The Newton step degenerated beyond ridge rescue."""


class EmptyData(EcofairError):
    """Training data is empty or otherwise insufficient for the learner."""


class ArityMismatch(EcofairError):
    """Feature count of the data does not match the fitted model."""


class MissingColumn(EcofairError):
    """A schema column is absent from the CSV header."""


class ParseFailure(EcofairError):
    """A CSV cell failed to parse; carries the offending row and column."""

    def __init__(self, row: int, column: str, message: str = ""):
        self.row = row
        self.column = column
        super().__init__(message or f"row {row}, column {column!r}: unparseable cell")


class NoReplicates(EcofairError):
    """No successful replicates are available for aggregation."""


class InsufficientRatios(EcofairError):
    """Fewer than two qualifying ratios; no confidence interval possible."""
