"""Exception hierarchy shared by all modules."""


class DiamagError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(DiamagError, ValueError):
    """Invalid geometry, parameters or configuration document."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors) if errors else [message]


class ResourceError(DiamagError, MemoryError):
    """Problem size exceeds a configured cap."""


class DomainError(DiamagError, ValueError):
    """Activity or parameter outside the analyticity domain."""


class ContourError(DiamagError):
    """Contour does not enclose the spectrum or a node solve failed."""


class BranchError(ContourError):
    """Logarithm argument hit the branch cut at a quadrature node."""


class ConvergenceError(DiamagError, RuntimeError):
    """An eigensolver failed to converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class ConditioningError(DiamagError, RuntimeError):
    """Eigenbasis too ill-conditioned for the diagonalization path."""


class AnalyticityRadiusError(DiamagError, RuntimeError):
    """Cauchy circle could not be shrunk into the analyticity domain."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius
