"""Exception types shared across the package."""


class DomainError(ValueError):
    """A loss was evaluated at a point outside its domain of definition."""


class NoConstantBoundError(ValueError):
    """The requested loss admits no constant curvature bound (use an
    adaptive step size instead)."""


class StagnationError(RuntimeError):
    """Backtracking shrank the trial step below the underflow floor without
    finding sufficient decrease."""


class NoBracketError(RuntimeError):
    """Root bracketing failed: the target variance level is not attained
    inside the search interval."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
