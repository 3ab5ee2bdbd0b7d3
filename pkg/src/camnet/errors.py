"""Exception hierarchy shared by all camnet modules."""

from __future__ import annotations


class CamnetError(Exception):
    """Base class for every error raised by camnet."""


class InputError(CamnetError):
    """Malformed or inconsistent user input (CLI exit code 2)."""


class VerificationFailure(CamnetError):
    """A computed object failed one of its defining checks (CLI exit code 1)."""


# liealg
class UnsupportedSeries(InputError):
    pass


class NotConvex(CamnetError):
    pass


class NegativeRoot(CamnetError):
    pass


# unipotent
class NotAFace(CamnetError):
    pass


# scattering
class DiagramError(CamnetError):
    pass


class NonConvexIncoming(DiagramError):
    pass


class DuplicateIncomingRoot(DiagramError):
    pass


class OutgoingMismatch(DiagramError):
    pass


class CoincidentRays(DiagramError):
    pass


class UnsupportedKind(InputError):
    pass


# wkb
class DegenerateCurve(InputError):
    pass


class NonSimpleBranching(CamnetError):
    pass


class HigherOrderPole(CamnetError):
    pass


class NoValidRadius(CamnetError):
    pass


class SeedFailure(CamnetError):
    pass


class SheetTrackingLost(CamnetError):
    pass


class NonConvexJoint(CamnetError):
    pass


# nonab
class BadShape(VerificationFailure):
    pass


class TransportInconsistent(VerificationFailure):
    pass


class PathTouchesNetworkVertex(CamnetError):
    pass


class FlatnessViolation(VerificationFailure):
    pass


class InconsistentCoverData(InputError):
    pass


class WrongRamificationMonodromy(VerificationFailure):
    pass
