"""Exception hierarchy shared across the toolkit.

The CLI maps each family onto a stable exit code, so new errors should
subclass one of the families below rather than ``LoanProfitError`` directly.
"""


class LoanProfitError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(LoanProfitError, ValueError):
    """Invalid configuration value or file."""


class DataError(LoanProfitError, ValueError):
    """Input data violates a schema or a precondition."""


class DomainError(DataError):
    """A value outside the mathematical domain of a formula."""

    def __init__(self, field, value, message=None):
        self.field = field
        self.value = value
        super().__init__(message or f"{field} must be positive, got {value!r}")


class RejectedRecordError(DataError):
    """A loan record that cannot produce an outcome (e.g. still in repayment)."""


class SchemaError(DataError):
    """Missing columns, column mismatch between fit and predict, etc."""


class EncodingError(DataError):
    """A feature cannot be encoded from the training data."""


class StructuralError(DataError):
    """Malformed matrix operation (length mismatch, duplicate column)."""


class SizeError(DataError):
    """Too few records, k out of range, empty selections."""


class DegenerateTargetError(DataError):
    """Target with a single class or no variation where two are needed."""


class ConsistencyError(LoanProfitError, RuntimeError):
    """Internal invariant broken, e.g. histogram totals not matching the parent."""


class InputError(DataError):
    """Bad training or prediction input for the boosting engine."""
