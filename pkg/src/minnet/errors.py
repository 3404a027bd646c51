"""Exception hierarchy shared by all minnet modules."""


class MinError(Exception):
    """Base class for every error raised by this package."""


# --- codec ---------------------------------------------------------------

class CodecError(MinError):
    """Base class for wire-format errors; decode never raises anything else."""


class TruncatedInput(CodecError):
    pass


class UnknownCriticalType(CodecError):
    """A type code below 0x80 that the current grammar does not define."""


class NonCanonicalEncoding(CodecError):
    """Structurally valid TLV that is not the canonical form of any packet."""


class LengthMismatch(CodecError):
    """Trailing bytes after a packet, or a fixed-width field of wrong size."""


class InvariantViolation(CodecError):
    """A decoded or constructed value violates a domain invariant."""


class UnknownAlgorithm(CodecError):
    """Signature algorithm code other than the supported one."""


# --- identifier ----------------------------------------------------------

class NoValidIdentifier(MinError):
    """Candidate sorting filtered every identifier out."""


class NoTranslation(MinError):
    """No node of the requested type is reachable in the identifier graph."""


# --- forwarding ----------------------------------------------------------

class NoRoute(MinError):
    pass


class HopLimitExceeded(MinError):
    pass


# --- customs -------------------------------------------------------------

class RevokedKey(MinError):
    pass


class ExpiredKey(MinError):
    pass


class UnknownSubject(MinError):
    pass


# --- identity ------------------------------------------------------------

class BannedIdentity(MinError):
    pass


class DuplicateBiometric(MinError):
    pass


class UnknownIdentity(MinError):
    pass


# --- registry ------------------------------------------------------------

class RegistryError(MinError):
    pass


class BadSignature(RegistryError):
    pass


class Unauthorized(RegistryError):
    pass


class NotFound(RegistryError):
    pass


class NoQuorum(RegistryError):
    pass


class InvalidProposal(RegistryError):
    pass


# --- simnet --------------------------------------------------------------

class ScenarioInvalid(MinError):
    pass


class AssertionFailed(MinError):
    pass


class UnknownAttackKind(MinError):
    pass
