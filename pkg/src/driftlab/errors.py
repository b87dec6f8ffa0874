"""Exception taxonomy shared across the package."""


class DriftlabError(Exception):
    """Base class for all package errors."""


class DimensionError(DriftlabError, ValueError):
    """Operands have incompatible shapes or lengths."""


class ConfigurationError(DriftlabError, ValueError):
    """A model, instance, or config document is structurally invalid."""


class DomainError(DriftlabError, ValueError):
    """An input violates a documented mathematical precondition."""


class EstimationError(DriftlabError, RuntimeError):
    """An empirical estimate cannot be formed from the available data."""
