"""Exception types shared across the package."""


class PipeflexError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PipeflexError):
    """Invalid configuration text or parameter values."""


class HorizonError(PipeflexError):
    """Velocity profile evaluated outside its valid time span."""


class InitialConditionError(PipeflexError):
    """Initial data violates the essential constraint w(0) = 0."""


class CertificateError(PipeflexError):
    """Decay certificate not applicable or infeasible for these parameters."""


class StepError(PipeflexError):
    """A single implicit step failed (singular effective matrix)."""


class DivergenceError(PipeflexError):
    """Simulation produced non-finite values.

    Carries the blow-up time and the partial trajectory recorded so far, so
    callers can flush what exists before reporting.
    """

    def __init__(self, message, t_blowup, partial=None):
        super().__init__(message)
        self.t_blowup = t_blowup
        self.partial = partial


class InsufficientDataError(PipeflexError):
    """Not enough usable samples for a fit or a check."""


class NotApplicableError(PipeflexError):
    """Operation undefined for these parameters (e.g. m_f = 0 weights)."""
