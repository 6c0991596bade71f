"""Exception types shared across the solver pipeline."""


class DrawdownError(Exception):
    """Base class for all package errors."""


class ParamError(DrawdownError, ValueError):
    """Invalid model parameters."""


class RangeError(ParamError):
    """A parameter lies outside its admissible range."""


class DiscountTooSmall(ParamError):
    """The discount rate violates the standing lower bound."""


class GridTooCoarse(DrawdownError, ValueError):
    """Requested grid has too few nodes or layers."""


class BadRange(DrawdownError, ValueError):
    """Requested spatial range does not cover the kink interval."""


class PolicyIterationDiverged(DrawdownError, RuntimeError):
    """Regime assignment failed to reach a fixed point."""


class ToleranceNotMet(DrawdownError, RuntimeError):
    """Converged solution violates the complementarity tolerance."""


class NewtonDiverged(DrawdownError, RuntimeError):
    """Semismooth Newton loop on the penalized equation did not converge."""


class NonMonotoneBoundary(DrawdownError, RuntimeError):
    """An extracted free boundary violates its monotonicity beyond tolerance."""


class EmptyGradientRegion(DrawdownError, RuntimeError):
    """A layer has no gradient-constrained node where one is required."""


class NonConvexDual(DrawdownError, RuntimeError):
    """Discrete dual value lost convexity in the price variable."""


class CrossCheckFailed(DrawdownError, RuntimeError):
    """Analytic and interpolated threshold values disagree beyond tolerance."""


class OutOfDomain(DrawdownError, ValueError):
    """Feedback map evaluated outside the continuation region."""


class UnstableStep(DrawdownError, RuntimeError):
    """A simulation step moved wealth by an implausible factor."""


class InadmissibleChallenger(DrawdownError, ValueError):
    """A challenger policy emitted consumption outside [alpha*z, z]."""


class ConfigError(DrawdownError, ValueError):
    """Malformed configuration file or missing key."""
