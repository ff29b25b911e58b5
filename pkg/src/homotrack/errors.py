"""Exception types shared across the package."""


class HomotrackError(Exception):
    """Base class for all package errors."""


class ConstructionFailed(HomotrackError):
    """No valid obstacle ray could be constructed automatically."""


class UndefinedWinding(HomotrackError):
    """Path passes too close to the reference point for a winding number."""


class DegenerateTrajectory(HomotrackError):
    """Trajectory has zero duration or too few points to resample."""


class ParseError(HomotrackError):
    """Malformed input file; carries a line number when available."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BoundaryViolation(HomotrackError):
    """Trajectory endpoints are not within tolerance of the domain boundary."""


class RejectionBudgetExceeded(HomotrackError):
    """Synthetic sample rejected too many times in a row."""


class InsufficientClassMembers(HomotrackError):
    """A homotopy class has too few trajectories for the requested operation."""


class NumericalFailure(HomotrackError):
    """A linear-algebra step failed even after jitter; configuration bug."""


class AllWeightsZero(HomotrackError):
    """Every mixture weight vanished during an update."""


class LabelMismatch(HomotrackError):
    """Component labels of two mixtures do not line up."""


class EmptyInstance(HomotrackError):
    """Thresholding left no cells to build an orienteering instance from."""


class InstanceTooLarge(HomotrackError):
    """Instance exceeds the exhaustive solver's enumeration budget."""


class NoFeasibleAction(HomotrackError):
    """No orienteering node is reachable from the current robot state."""


class ToyTooLarge(HomotrackError):
    """Discrete toy exceeds the enumeration budget."""
