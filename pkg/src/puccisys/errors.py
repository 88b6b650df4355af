"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    pass


class StepRejected(RuntimeError):
    """Raised when a time step violates the stability (CFL) bound."""


class InvalidState(RuntimeError):
    pass


class DegenerateRatio(ValueError):
    pass


class DegenerateProfile(RuntimeError):
    """Power iteration lost positivity of the profile (grid too coarse or box too small)."""


class CoverageError(ValueError):
    pass


class CertificateContradiction(RuntimeError):
    """A certified run blew up or left the barrier; carries the discretization for diagnosis."""

    def __init__(self, message, h=None, dt=None, radius=None):
        super().__init__(f"{message} (h={h}, dt={dt}, R={radius})")
        self.h = h
        self.dt = dt
        self.radius = radius


class ConfigError(ValueError):
    """Configuration violation; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
