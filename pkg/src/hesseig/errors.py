"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class ConeError(ValueError):
    """Eigenvalues fall outside the required Garding cone."""


class DualConeError(ConeError):
    """A coefficient matrix is not in the dual cone (objective unbounded below)."""


class NumericalError(RuntimeError):
    """An iterative procedure failed to converge; diagnostics attached when available."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class BracketingError(NumericalError):
    """A root/eigenvalue bracket could not be established."""


class CeilingError(NumericalError):
    """No blow-up found below the configured search ceiling."""


class StiffnessError(NumericalError):
    """Explicit time stepping underflowed its step size; trajectory attached."""


class DegenerateInputError(ValueError):
    """Input is identically zero or otherwise degenerate for the requested quantity."""


class ConfigError(ValueError):
    """Config text is syntactically or semantically invalid."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
