"""Exception hierarchy shared by all modules and mapped to CLI exit codes."""


class ValidationError(ValueError):
    """Invalid user input (domain, dipoles, parameters). CLI exit code 2."""


class PlacementError(ValidationError):
    """A point cannot be snapped to interior edges."""

    def __init__(self, point, reason):
        self.point = tuple(float(c) for c in point)
        self.reason = reason
        super().__init__(f"cannot place point {self.point}: {reason}")


class SolverError(RuntimeError):
    """A linear or eigen solver failed to reach its tolerance. CLI exit code 3."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
