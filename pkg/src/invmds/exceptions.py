"""Exception and warning types shared across the package."""


class InvalidInputError(ValueError):
    """Input failed validation (shape, symmetry, finiteness, range)."""


class DegenerateInputError(ValueError):
    """Input is well-formed but carries no geometry (e.g. all points coincide)."""


class ConfigurationError(ValueError):
    """Inconsistent or out-of-range configuration."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    The best residual reached is kept on ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class TrainingDivergenceError(RuntimeError):
    """Loss became non-finite during training."""


class MultiplicityWarning(UserWarning):
    """Leading eigenvalues are (nearly) repeated; eigenvectors are not unique."""
