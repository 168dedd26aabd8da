"""Exception hierarchy shared across the package."""


class LogitbenchError(Exception):
    """Base class for all package-specific errors."""


class IngestError(LogitbenchError):
    """Problem while loading or processing tabular input."""


class OutcomeNotBinary(IngestError):
    """The outcome column does not have exactly two distinct values."""


class DegenerateDesign(IngestError):
    """All predictor columns were removed during processing."""


class FitError(LogitbenchError):
    """A model fit could not be completed."""


class SingularInformation(FitError):
    """The observed information matrix is rank deficient."""


class SeparationSuspected(FitError):
    """Coefficient divergence guard tripped during maximum likelihood."""


class NoConvergence(FitError):
    """Iteration cap reached without meeting the convergence tolerance."""


class EnumerationRequired(LogitbenchError):
    """An operation needs an exhaustively enumerated model space."""


class EmptyModelSelected(LogitbenchError):
    """The generating-model selection kept no predictors."""


class ConfigError(LogitbenchError):
    """Invalid simulation or CLI configuration."""
