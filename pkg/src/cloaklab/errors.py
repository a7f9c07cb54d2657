"""Exception hierarchy for cloaklab.

Numerical failures (exit code 2 in the CLI) all derive from CloakLabError;
plain argument/validation mistakes raise ValueError subclasses (exit 1).
"""


class CloakLabError(Exception):
    """Base class for numerical failures."""


class SingularArgumentError(CloakLabError):
    """Function evaluated at a point where it is singular (e.g. H_n at 0)."""


class RangeError(CloakLabError):
    """Overflow / loss of finiteness for extreme arguments."""


class PrecisionError(CloakLabError):
    """A series or quadrature failed to reach its accuracy target."""


class PoleError(CloakLabError):
    """Evaluation at (or too close to) a pole of the dispersion term."""

    def __init__(self, message, poles=()):
        super().__init__(message)
        self.poles = tuple(poles)


class IntegrationError(CloakLabError):
    """Adaptive ODE integration failed (step underflow, stiffness)."""


class ContractionError(CloakLabError):
    """Fixed-point solve refused: measured operator norm too large."""

    def __init__(self, message, measured_norm=None):
        super().__init__(message)
        self.measured_norm = measured_norm


class InconclusiveBoxError(CloakLabError):
    """Winding-number phase tracking could not be disambiguated on a box."""


class ValidationError(ValueError):
    """Bad configuration or arguments (CLI exit code 1)."""
