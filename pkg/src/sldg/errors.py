"""Exception types shared across the solver modules."""


class SLDGError(Exception):
    """Base class for solver errors."""


class DegenerateCell(SLDGError):
    """Upstream cell collapsed or inverted (signed area below tolerance).

    Signals that the time step deformed cells beyond what the scheme
    tolerates; an adaptive driver may retry with a smaller CFL.
    """

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class DegenerateEdge(SLDGError):
    """Curved-edge construction failed (coincident endpoints or |xi_2| = 1)."""


class ClipFailure(SLDGError):
    """Segment search produced inconsistent boundary bookkeeping.

    Diagnostic only: should never fire on a simple, correctly oriented cell.
    """

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class SingularFit(SLDGError):
    """Least-squares test-function fit is rank deficient (collinear points)."""

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class NegativeAverage(SLDGError):
    """A cell average fell below zero; conservation upstream is broken."""


class MeshMismatch(SLDGError):
    """Fields combined or compared across incompatible meshes."""


class UnknownTableau(SLDGError):
    """Requested exponential-integrator tableau name is not a builtin."""


class ZeroSpeed(SLDGError):
    """Both transport speeds are zero; no CFL-based step size exists."""


class ConfigError(SLDGError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """Malformed configuration text; carries a line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ValidationError(ConfigError):
    """Well-formed configuration with an invalid or unknown entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
