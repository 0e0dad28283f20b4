"""Exception hierarchy.

Two broad families matter operationally: problems with the input data
(schema violations, impossible values, malformed configs) and problems
with the numerics (separated fits, singular designs, dead imputation
strata).  The CLI maps them to distinct exit codes, so keep new
exceptions under one of the two branches.
"""


class RecontactAdjustError(Exception):
    """Base class for all package errors."""


class DataError(RecontactAdjustError):
    """Invalid input data or configuration."""


class CohortSchemaError(DataError):
    """A cohort file does not have the expected columns."""


class CohortValueError(DataError):
    """A cohort cell holds a value outside its domain."""


class ConfigError(DataError):
    """A generator or run configuration is malformed."""


class TruthUnavailableError(DataError):
    """Ground truth was requested but is not attached to the cohort."""


class NumericError(RecontactAdjustError):
    """A model fit or sampling step failed numerically."""


class SeparationError(NumericError):
    """Logistic likelihood is unbounded (perfect separation)."""

    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


class CollinearityError(NumericError):
    """Design matrix is rank deficient or near singular."""


class ConvergenceError(NumericError):
    """An iterative fit exhausted its iteration budget."""


class DonorPoolError(NumericError):
    """An imputation model has too few observed rows to fit."""
