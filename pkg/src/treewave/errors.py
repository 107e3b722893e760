"""Exception hierarchy. Each class maps to a distinct CLI exit code (see cli)."""


class TreewaveError(Exception):
    """Base class for all library errors."""


# graph ingestion / validation
class SchemaError(TreewaveError):
    """Malformed graph or data document."""


class CycleDetected(SchemaError):
    pass


class Disconnected(SchemaError):
    pass


class NonPositiveLength(SchemaError):
    pass


class CoefficientOutOfBounds(SchemaError):
    pass


class BreakpointOutOfRange(SchemaError):
    pass


class OutOfRangeCoordinate(SchemaError):
    pass


class NoReducibleVertex(TreewaveError):
    pass


class InvalidStep(TreewaveError):
    pass


# exp-poly / expansion
class NotContractive(TreewaveError):
    """Geometric inversion attempted outside the contraction regime."""

    def __init__(self, ratio: float, message: str = ""):
        self.ratio = ratio
        super().__init__(message or f"series ratio {ratio:.6g} >= 1")


# resolvent / propagation
class ZeroFrequency(TreewaveError):
    pass


class ZeroTime(TreewaveError):
    pass


class SingularSystem(TreewaveError):
    pass


class BoundViolated(TreewaveError):
    pass


class UnsupportedData(TreewaveError):
    pass


class GridMismatch(TreewaveError):
    pass


class TruncationTooShort(TreewaveError):
    pass


class ExponentOutOfRange(TreewaveError):
    pass


class BlowUpSuspected(TreewaveError):
    def __init__(self, t: float, linf: float, message: str = ""):
        self.t = t
        self.linf = linf
        super().__init__(message or f"L-inf grew to {linf:.3g} by t={t:.4g}")


class ConfigError(TreewaveError):
    pass
