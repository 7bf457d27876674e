"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Malformed or inadmissible input data."""


class NonstationaryError(ValueError):
    """Dynamics violate the stationarity requirement rho(A+B) < 1."""


class TargetingError(ValueError):
    """Targeting reparameterization produced a non-positive intercept."""

    def __init__(self, message, equations=None):
        super().__init__(message)
        self.equations = tuple(equations) if equations is not None else ()


class ConvergenceError(RuntimeError):
    """Numerical optimization failed to converge; carries per-start traces."""

    def __init__(self, message, traces=None):
        super().__init__(message)
        self.traces = traces or []


class InferenceError(RuntimeError):
    """Asymptotic inference is unreliable or unavailable for this fit."""
