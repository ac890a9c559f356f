"""Exception types shared across the toolkit."""


class IrrischedError(Exception):
    """Base class for all toolkit errors."""


class NonConvergence(IrrischedError):
    """Implicit solver failed to converge after the step-halving ladder.

    Carries the inner-step index and the last residual norm so that callers
    can report exactly where a simulated day broke down.
    """

    def __init__(self, message, step_index=None, residual_norm=None, zone_id=None, day=None):
        super().__init__(message)
        self.step_index = step_index
        self.residual_norm = residual_norm
        self.zone_id = zone_id
        self.day = day


class NonFiniteState(IrrischedError):
    """A pressure-head profile left the finite range."""


class InvalidBounds(IrrischedError):
    """Target moisture bound parameters violate their preconditions."""


class ShapeMismatch(IrrischedError):
    """Tensor or vector shapes are inconsistent with the network layout."""


class DegenerateBounds(IrrischedError):
    """Min-max normalizer was configured with min >= max on some dimension."""


class LengthMismatch(IrrischedError):
    """Sequence arguments that must share a length do not."""


class EmptyPool(IrrischedError):
    """A trajectory pool update was requested before the pool was filled."""


class RmseGateFailed(IrrischedError):
    """Surrogate training did not reach the validation RMSE gate."""

    def __init__(self, message, achieved_rmse=None):
        super().__init__(message)
        self.achieved_rmse = achieved_rmse


class ForecastTooShort(IrrischedError):
    """Forecast sequences do not cover the requested horizon."""


class Empty(IrrischedError):
    """An operation required a nonempty sequence."""


class OrderingViolation(IrrischedError):
    """Water-stress thresholds are not strictly ordered."""


class IncompleteLog(IrrischedError):
    """A season log is missing days or zones required by a metric."""


class ZeroIrrigation(IrrischedError):
    """Water-use efficiency is undefined for zero total irrigation."""


class SingularInnovationCovariance(IrrischedError):
    """The filter innovation covariance is not invertible."""


class ConfigError(IrrischedError):
    """Configuration file is malformed, has unknown keys, or bad values."""


class MissingArtifact(IrrischedError):
    """A required checkpoint, surrogate, or log file is absent."""
