"""Error types raised by the QKD simulator.

Every error is a ValueError so callers can catch invalid input the same way
regardless of which component rejected it.
"""


class QkdSimulatorError(ValueError):
    """Base class for simulator errors."""


class DimensionMismatchError(QkdSimulatorError):
    """Amplitude count does not match 2 ** (number of labels)."""


class NotNormalizableError(QkdSimulatorError):
    """State norm is zero or too far from 1 to renormalize."""


class UnknownLabelError(QkdSimulatorError):
    """A qubit label is not present in the register."""


class SameQubitError(QkdSimulatorError):
    """A two-qubit operation was given the same label twice."""


class DuplicateLabelError(QkdSimulatorError):
    """A label appears more than once where labels must be distinct."""


class LabelMismatchError(QkdSimulatorError):
    """Two registers do not carry the same label set."""


class ConfigError(QkdSimulatorError):
    """A session or CLI parameter is out of range."""


class ConfigMismatchError(QkdSimulatorError):
    """A config was handed to a runner for a different protocol or attack."""


class MissingAnnouncementError(QkdSimulatorError):
    """A key round has no matching public announcement."""


class EmptySampleError(QkdSimulatorError):
    """The eavesdropping check received no sample pairs."""


class UnsupportedCombinationError(QkdSimulatorError):
    """The exact oracle has no model for this protocol/attack pair."""


class LengthMismatchError(QkdSimulatorError):
    """Keys handed to reconciliation differ in length or are too short."""


class OutOfRangeError(QkdSimulatorError):
    """A numeric argument lies outside its domain."""


class EfficiencyUndefinedError(QkdSimulatorError, ZeroDivisionError):
    """An efficiency figure has a zero denominator."""


class EmptyInputError(QkdSimulatorError):
    """An aggregation received no reports."""


class HeterogeneousCellError(QkdSimulatorError):
    """Reports in one summary cell disagree on protocol or attack."""


class GridTooLargeError(QkdSimulatorError):
    """A sweep grid exceeds the cell limit."""
