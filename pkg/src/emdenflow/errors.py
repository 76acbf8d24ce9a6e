"""Exception hierarchy shared by every layer of the toolkit."""


class EmdenFlowError(Exception):
    """Base class for all package errors."""


class RegimeUndefined(EmdenFlowError):
    """A constant was requested outside the parameter range where it exists."""


class RegimeMismatch(EmdenFlowError):
    """An operation was called in a parameter regime it does not cover."""


class NotAnEquilibrium(EmdenFlowError):
    """The supplied point does not solve the equilibrium equation."""


class NotACenterCandidate(EmdenFlowError):
    """The linearization has nonzero trace, so no Lyapunov coefficient applies."""


class NotASaddle(EmdenFlowError):
    """A saddle was required but the equilibrium is of another type."""


class BadK(EmdenFlowError):
    """Desingularization exponent is too small."""


class StepUnderflow(EmdenFlowError):
    """Adaptive step size fell below the floating point resolution of t."""


class BlowupGuard(EmdenFlowError):
    """The orbit left every bounded region the integrator is willing to track."""


class TransformInvalid(EmdenFlowError):
    """The (sigma, z) change of variables is singular along the orbit."""


class NoCycleFound(EmdenFlowError):
    """The return map has no usable fixed point near the hint."""


class UndeterminedTrajectory(EmdenFlowError):
    """A shooting evaluation could not classify one of its trajectories."""
