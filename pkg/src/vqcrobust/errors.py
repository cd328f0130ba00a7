"""Exception types raised across the package."""


class VQCError(Exception):
    """Base class for all package errors."""


class NotHermitian(VQCError, ValueError):
    pass


class NoConvergence(VQCError, RuntimeError):
    pass


class NonPositiveSpectrum(VQCError, ValueError):
    pass


class DimensionMismatch(VQCError, ValueError):
    pass


class BadQubitIndex(VQCError, IndexError):
    pass


class FeatureCountMismatch(VQCError, ValueError):
    pass


class ZeroVector(VQCError, ValueError):
    pass


class UnknownAnsatz(VQCError, KeyError):
    pass


class LengthMismatch(VQCError, ValueError):
    pass


class TooManyQubits(VQCError, ValueError):
    pass


class UnboundAngle(VQCError, ValueError):
    pass


class UnsupportedGate(VQCError, ValueError):
    pass


class DisconnectedDevice(VQCError, ValueError):
    pass


class BadConfig(VQCError, ValueError):
    pass


class BadK(VQCError, ValueError):
    pass


class LabelDomainMismatch(VQCError, ValueError):
    pass


class SingleClass(VQCError, ValueError):
    pass


class SubsampleWithPaperLiteral(VQCError, ValueError):
    pass


class NonPositiveEntropy(VQCError, ValueError):
    pass


class SingularKernel(VQCError, ValueError):
    pass


class InsufficientPoints(VQCError, ValueError):
    pass
