"""Exception hierarchy shared by the model, integrator and section engine."""


class DFLorenzError(Exception):
    """Base class for all package errors."""


class OutOfDomainError(DFLorenzError):
    """A point lies outside the region where a backend defines the field."""


class StableManifoldError(DFLorenzError):
    """The point sits on the local stable manifold of the singularity (on L)."""


class EscapeError(DFLorenzError):
    """An orbit left the attracting region before returning to the section."""


class DegenerateInputError(DFLorenzError):
    """Singular matrix, degenerate plane, or a curve with no usable extent."""


class NearSingularityError(DFLorenzError):
    """An orbit came too close to the singularity for normal-bundle quantities."""


class StiffnessError(DFLorenzError):
    """Adaptive step size underflowed."""


class PeriodicityError(DFLorenzError):
    """Input orbit does not close up to the required residual."""


class ConeViolationError(DFLorenzError):
    """A curve tangent lies outside the cone it is required to respect."""


class ConfigError(DFLorenzError):
    """Invalid configuration key or value."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
