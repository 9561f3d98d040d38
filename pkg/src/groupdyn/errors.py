"""Exception types shared across the package."""


class GroupDynError(Exception):
    """Base class for all groupdyn errors."""


class ConfigError(GroupDynError):
    """A configuration value violates a precondition."""


class DataFormatError(GroupDynError):
    """An input file is malformed.

    Carries the 1-based line number when the problem is tied to a line.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OverflowTickError(GroupDynError):
    """A group count left the representable range at a known tick."""

    def __init__(self, action_id, tick, log_value):
        super().__init__(
            f"action {action_id!r}: count overflows float range at tick {tick} "
            f"(log count {log_value:.3g})"
        )
        self.action_id = action_id
        self.tick = tick
        self.log_value = log_value


class DegenerateModelError(GroupDynError):
    """All adoption probabilities are 0 or 1, so the variance rate vanishes."""


class DegeneratePairError(GroupDynError):
    """A tick pair with proportional tallies cannot be inverted for factors."""


class EstimationError(GroupDynError):
    """An estimator had no usable input (e.g. no non-degenerate tick pair)."""


class FitError(GroupDynError):
    """A distribution fit failed or its preconditions were not met."""


class NumericalError(GroupDynError):
    """A numerical routine (quadrature, overflow guard) failed to converge."""


class TrainingError(GroupDynError):
    """Classifier training could not proceed (e.g. single-class data)."""
