"""Exception types raised by the solvers."""


class GravshockError(Exception):
    """Base class for all package errors."""


class DomainError(GravshockError):
    """A thermodynamic state violates its positivity constraints."""


class ShockAdmissibilityError(GravshockError):
    """Upstream state is not supersonic, no compressive shock exists."""


class InvalidBackgroundError(GravshockError):
    """Stratified background construction failed (reports the offending y)."""

    def __init__(self, message, y=None):
        super().__init__(message)
        self.y = y


class InvalidPerturbationError(GravshockError):
    """Perturbed entrance data produce a non-physical state."""


class DegenerateMapError(GravshockError):
    """Shock-fixing coordinate map is degenerate (shock reaches the exit)."""


class RangeError(GravshockError):
    """Requested trace position lies outside the computed domain."""


class CoercivityError(GravshockError):
    """Nozzle too long: the zero-order term defeats the elliptic operator."""

    def __init__(self, message, l_max=None, eig_min=None):
        super().__init__(message)
        self.l_max = l_max
        self.eig_min = eig_min


class SolvabilityError(GravshockError):
    """Boundary data violate the corner-continuity solvability condition."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CompatibilityError(GravshockError):
    """Discrete Neumann compatibility defect above tolerance."""

    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


class NearSonicError(GravshockError):
    """Jump-condition matrix nearly singular (downstream state near sonic)."""


class StateBreakdownError(GravshockError):
    """Iterate left the admissible state region (cos(theta) <= 0 or rho*q <= 0)."""


class DivergenceError(GravshockError):
    """Shock-mean update left its trust region."""


class NonContractionError(GravshockError):
    """Fixed-point iteration failed to contract."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class ConfigError(GravshockError):
    """Run configuration failed validation."""
