"""Exception types raised across the package."""


class MMRMError(Exception):
    """Base class for all package errors."""


class DataFormatError(MMRMError):
    """Input file could not be parsed."""


class NonMonotoneError(MMRMError):
    def __init__(self, subject_id, visit):
        self.subject_id = subject_id
        self.visit = visit
        super().__init__(
            f"subject {subject_id!r} has an observed value at visit {visit} after a missing one"
        )


class EmptyVisitError(MMRMError):
    def __init__(self, visit):
        self.visit = visit
        super().__init__(f"no subject is observed at visit {visit}")


class InsufficientDataError(MMRMError):
    pass


class NotPositiveDefiniteError(MMRMError):
    pass


class InvalidModelError(MMRMError, ValueError):
    pass


class InvalidSpecError(MMRMError, ValueError):
    pass


class RankDeficientError(MMRMError):
    def __init__(self, visit, detail=""):
        self.visit = visit
        super().__init__(f"design for visit {visit} is rank deficient{detail}")


class InsufficientRowsError(MMRMError):
    def __init__(self, visit, rows, needed):
        self.visit = visit
        super().__init__(f"visit {visit}: {rows} rows, need more than {needed}")


class DimensionMismatchError(MMRMError, ValueError):
    pass


class SingularCovariateScatterError(MMRMError):
    pass


class DegenerateDesignError(MMRMError):
    pass


class InfeasibleError(MMRMError):
    pass


class DomainError(MMRMError, ValueError):
    pass


class NonConvergenceError(MMRMError):
    pass


class ReplicationFailureError(MMRMError):
    pass
