"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`RankCFError`
so callers (the CLI, the bootstrap, the Monte Carlo harness) can separate
numerical failures from programming errors.
"""


class RankCFError(Exception):
    """Base class for package errors."""


class ConfigError(RankCFError, ValueError):
    """Invalid configuration (DGP, experiment, estimator options)."""


class DomainError(RankCFError, ValueError):
    """Argument outside the domain of an operation."""


class ShapeError(RankCFError, ValueError):
    """Array lengths or dimensions disagree."""


class ParseError(RankCFError, ValueError):
    """Malformed value in an input file."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class SchemaError(RankCFError, ValueError):
    """Input file does not provide the declared columns."""


class NumericalError(RankCFError):
    """Estimation failed for numerical reasons."""


class SingularDesignError(NumericalError):
    """First-stage design matrix is rank deficient."""

    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


class CollinearityError(NumericalError):
    """Augmented regressor matrix (X, control) is (near) collinear.

    This is how a non-identified design shows up in practice: a linear first
    stage combined with a normally distributed reduced-form error makes the
    control a linear combination of the regressors.
    """

    def __init__(self, message, design_condition):
        super().__init__(message)
        self.design_condition = design_condition


class BandwidthTooSmallError(NumericalError):
    """Kernel weights degenerate at some evaluation point."""


class DegenerateTrimError(NumericalError):
    """Trimming removed every observation."""


class UnreliableBootstrapError(NumericalError):
    """Too many bootstrap replications failed."""

    def __init__(self, message, b_used, b_failed):
        super().__init__(message)
        self.b_used = b_used
        self.b_failed = b_failed


class UnsupportedOperationError(RankCFError):
    """Operation not defined for the requested family or link."""
