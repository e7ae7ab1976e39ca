"""Exception types shared across the package."""


class PgmError(Exception):
    """Base class for all pgmkit errors."""


class IncompatibleVariableError(PgmError):
    """Two factors disagree on the definition of a shared variable."""


class ScopeError(PgmError):
    """A variable was referenced outside the scope it belongs to."""


class EvidenceError(PgmError):
    """Evidence refers to an unknown variable or state."""


class DegenerateDistributionError(PgmError):
    """An all-zero table cannot be normalized."""


class FactorDivisionError(PgmError):
    """Nonzero numerator over zero denominator."""


class NotADagError(PgmError):
    """A directed graph required to be acyclic contains a cycle."""

    def __init__(self, message, cycle=None):
        super().__init__(message)
        self.cycle = cycle


class OrderingError(PgmError):
    """An elimination ordering is not a permutation of the expected set."""


class NotATreeError(PgmError):
    """Tree-structured input required."""


class ZeroEvidenceError(PgmError):
    """The observed evidence has probability zero under the model."""


class TooLargeError(PgmError):
    """Enumeration would exceed the configured table-size cap."""


class TrappedStateError(PgmError):
    """A Gibbs full conditional assigns zero mass to every state."""


class InvalidKernelError(PgmError):
    """A Metropolis-Hastings proposal is not usable (e.g. zero reverse density)."""


class InfiniteWeightError(PgmError):
    """An importance-sampling proposal assigns zero density where weight is needed."""


class DegenerateUpdateError(PgmError):
    """A mean-field coordinate update produced an all-zero table."""


class InsufficientDataError(PgmError):
    """A score or estimate was requested from an empty dataset."""


class SchemaError(PgmError):
    """A model document or dataset violates the serialization schema."""

    def __init__(self, message, path=None):
        if path:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path
