"""Exception hierarchy shared by all modules."""


class MemsError(Exception):
    """Base class for every error raised by this package."""


class InvalidSpec(MemsError, ValueError):
    pass


class DimensionMismatch(InvalidSpec):
    pass


class DimensionNotSupported(InvalidSpec):
    pass


class ResolutionTooCoarse(InvalidSpec):
    pass


class TruncationTooLarge(InvalidSpec):
    pass


class LengthMismatch(MemsError, ValueError):
    pass


class SingularAssembly(MemsError):
    pass


class EigensolveFailure(MemsError):
    pass


class TouchdownImminent(MemsError):
    """Raised when the deflection reaches ``1 - touch_eps`` somewhere on the grid."""

    def __init__(self, message, max_u=None, coeffs=None):
        super().__init__(message)
        self.max_u = max_u
        self.coeffs = coeffs


class NonFinite(MemsError):
    pass


class InsufficientSamples(MemsError, ValueError):
    pass


class NoContraction(MemsError):
    pass


class BallTooLarge(MemsError, ValueError):
    pass


class RhoTooLarge(MemsError, ValueError):
    pass


class PositivityFailure(MemsError):
    pass


class DomainNotAdmissible(MemsError):
    pass


class MassAtTouchdown(MemsError, ValueError):
    pass


class NotSupercritical(MemsError, ValueError):
    pass


class ConfigInvalid(MemsError, ValueError):
    """Configuration rejected; ``errors`` maps field names to diagnostics."""

    def __init__(self, errors):
        self.errors = dict(errors)
        lines = [f"{k}: {v}" for k, v in self.errors.items()]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


class IoFailure(MemsError, OSError):
    pass


class FormatVersionMismatch(MemsError):
    pass


class CacheCorrupt(MemsError):
    pass
