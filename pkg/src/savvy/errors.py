"""Exception types shared across the toolkit."""


class SavvyError(Exception):
    """Base class for all toolkit errors."""


class ParseError(SavvyError):
    """Input file cannot be read at all (bad header, wrong column count)."""


class IntegrityError(SavvyError):
    """Structurally readable input that violates a dataset invariant."""


class ValidationError(SavvyError):
    """Valid data that does not satisfy the preconditions of an analysis."""


class SchemaMismatchError(SavvyError):
    """Aggregated result files with incompatible format versions."""

    def __init__(self, message, files=()):
        super().__init__(message)
        self.files = tuple(files)


class BootstrapUnstableError(SavvyError):
    """Too many bootstrap replicates yielded an undefined statistic."""

    def __init__(self, message, n_valid=0, n_degenerate=0):
        super().__init__(message)
        self.n_valid = n_valid
        self.n_degenerate = n_degenerate


class ConvergenceError(SavvyError):
    """An iterative solver failed to reach its tolerance."""
