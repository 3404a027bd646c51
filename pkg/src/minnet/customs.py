"""Border customs: time-windowed visa/pass stamps for cross-domain packets.

A visa is SHA-256 over (the masked UNIX time replicated into four 64-bit
little-endian lanes) XOR a 32-octet visa key; a pass is SHA-256 over the
32-octet passport key XOR the visa. Masking clears the low four bits of the
second count, so stamps are constant inside 16-second windows and verifiers
tolerate a configurable number of adjacent windows of clock skew.
"""

from __future__ import annotations

import heapq
import threading
from dataclasses import dataclass, replace
from enum import Enum

from minnet import _kernels as _k
from minnet.codec import MinPacket
from minnet.errors import ExpiredKey, InvariantViolation, RevokedKey, UnknownSubject

WINDOW_SECONDS = 16
TIME_MASK = 0xFFFFFFFFFFFFFFF0
KEY_LEN = 32

_LANES = 1 + (1 << 64) + (1 << 128) + (1 << 192)


def mask_time(unix_seconds: int) -> int:
    """Clear the low 4 bits: all instants in one 16-second window collapse."""
    return unix_seconds & TIME_MASK


def time256(masked: int) -> int:
    """The 256-bit window value: masked time replicated into four 64-bit lanes."""
    return masked * _LANES


def time256_bytes(masked: int) -> bytes:
    """Little-endian lane layout of time256, as XORed against the visa key."""
    return time256(masked).to_bytes(32, "little")


@dataclass
class CyberVisaKey:
    """Secret a destination domain issues to one foreign subject."""

    cvk: bytes
    subject: bytes
    issuing_domain: str
    expiry: int
    revoked: bool = False
    biometric_digest: bytes = b"\x00" * 32

    def __post_init__(self):
        if len(self.cvk) != KEY_LEN or len(self.subject) != 32:
            raise InvariantViolation("visa key and subject are 32 octets each")


@dataclass(frozen=True)
class CyberPassKey:
    """Secret a pair of border authorities share; one per domain pair."""

    cpk: bytes
    domain_pair: tuple[str, str]

    def __post_init__(self):
        if len(self.cpk) != KEY_LEN:
            raise InvariantViolation("passport key is 32 octets")
        object.__setattr__(self, "domain_pair", tuple(sorted(self.domain_pair)))


class RejectReason(Enum):
    BAD_VISA = "BadVisa"
    BAD_PASS = "BadPass"
    REPLAY = "Replay"
    REVOKED = "Revoked"
    MISSING_STAMP = "MissingStamp"


def compute_visa(now: int, cvk: CyberVisaKey) -> bytes:
    if cvk.revoked:
        raise RevokedKey(f"visa key for {cvk.subject.hex()[:16]} is revoked")
    if now > cvk.expiry:
        raise ExpiredKey(f"visa key for {cvk.subject.hex()[:16]} expired at {cvk.expiry}")
    return _k.visa_digest(mask_time(now), cvk.cvk)


def compute_pass(visa: bytes, cpk: CyberPassKey) -> bytes:
    return _k.pass_digest(cpk.cpk, visa)


class ReplayCache:
    """Seen (visa, nonce) pairs with expiry; check-and-insert is atomic."""

    def __init__(self):
        self._seen: dict[tuple[bytes, bytes], int] = {}
        self._heap: list[tuple[int, tuple[bytes, bytes]]] = []
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._seen)

    def check_and_insert(self, visa: bytes, nonce: bytes, now: int, lifetime: int) -> bool:
        """True (and remembered) if unseen; False if this pair already live."""
        key = (visa, nonce)
        with self._lock:
            while self._heap and self._heap[0][0] <= now:
                _, old = heapq.heappop(self._heap)
                if self._seen.get(old, now + 1) <= now:
                    del self._seen[old]
            hit = self._seen.get(key)
            if hit is not None and hit > now:
                return False
            self._seen[key] = now + lifetime
            heapq.heappush(self._heap, (now + lifetime, key))
            return True


def stamp_outbound(pkt: MinPacket, cvk: CyberVisaKey, cpk: CyberPassKey, now: int) -> MinPacket:
    """Return the packet with fresh visa/pass stamps; replaces stale ones."""
    visa = compute_visa(now, cvk)
    cpass = compute_pass(visa, cpk)
    return replace(
        pkt,
        readonly=replace(pkt.readonly, timestamp=now, cyber_visa=visa, cyber_pass=cpass),
    )


def verify_inbound(
    pkt: MinPacket,
    cvk: CyberVisaKey,
    cpk: CyberPassKey,
    now: int,
    skew_windows: int = 1,
    replay: ReplayCache | None = None,
) -> RejectReason | None:
    """None on acceptance, otherwise the reject reason.

    Accepts iff the visa matches some window within +-skew_windows of local
    time, the pass binds that visa to the shared passport key, the key is
    still valid, and (visa, nonce) was not seen before.
    """
    ro = pkt.readonly
    if ro.cyber_visa is None or ro.cyber_pass is None:
        return RejectReason.MISSING_STAMP
    # an expired credential is no longer valid: same outcome as revocation
    if cvk.revoked or now > cvk.expiry:
        return RejectReason.REVOKED
    base = mask_time(now)
    for w in _window_order(skew_windows):
        masked = base + WINDOW_SECONDS * w
        if masked < 0:
            continue
        if _k.visa_digest(masked, cvk.cvk) == ro.cyber_visa:
            break
    else:
        return RejectReason.BAD_VISA
    if _k.pass_digest(cpk.cpk, ro.cyber_visa) != ro.cyber_pass:
        return RejectReason.BAD_PASS
    if replay is not None:
        lifetime = (2 * skew_windows + 1) * WINDOW_SECONDS
        if not replay.check_and_insert(ro.cyber_visa, ro.nonce, now, lifetime):
            return RejectReason.REPLAY
    return None


def _window_order(skew: int):
    # same-window stamps dominate, so probe w=0 first
    yield 0
    for w in range(1, skew + 1):
        yield -w
        yield w


@dataclass
class VisaRegistryHook:
    """Callable bridge so a revocation lands on the registry ledger."""

    submit_revocation: callable  # (subject: bytes, domain: str) -> ticket


class CustomsAuthority:
    """One domain's border customs: issued visas, shared passport keys, and
    the replay cache its border routers consult."""

    def __init__(self, domain: str, skew_windows: int = 1):
        self.domain = domain
        self.skew_windows = skew_windows
        self.issued: dict[bytes, CyberVisaKey] = {}
        self.outbound: dict[tuple[bytes, str], CyberVisaKey] = {}
        self.passports: dict[tuple[str, str], CyberPassKey] = {}
        self.replay = ReplayCache()

    # --- key management ---------------------------------------------------

    def issue_visa(self, subject: bytes, expiry: int, key: bytes,
                   biometric_digest: bytes = b"\x00" * 32) -> CyberVisaKey:
        cvk = CyberVisaKey(key, subject, self.domain, expiry, biometric_digest=biometric_digest)
        self.issued[subject] = cvk
        return cvk

    def hold_outbound(self, cvk: CyberVisaKey) -> None:
        """Pre-share a foreign-issued visa key for one of this domain's users.

        A copy is held: revocation lives at the issuer, and a revoked user's
        home border may well keep stamping — the receiving border is the one
        that must reject."""
        self.outbound[(cvk.subject, cvk.issuing_domain)] = replace(cvk)

    def agree_passport(self, other_domain: str, key: bytes) -> CyberPassKey:
        cpk = CyberPassKey(key, (self.domain, other_domain))
        self.passports[cpk.domain_pair] = cpk
        return cpk

    def passport_for(self, other_domain: str) -> CyberPassKey | None:
        return self.passports.get(tuple(sorted((self.domain, other_domain))))

    # --- data path --------------------------------------------------------

    def stamp(self, pkt: MinPacket, subject: bytes, dest_domain: str, now: int) -> MinPacket:
        cvk = self.outbound.get((subject, dest_domain))
        if cvk is None:
            raise UnknownSubject(f"no visa key held for {subject.hex()[:16]} toward {dest_domain}")
        cpk = self.passport_for(dest_domain)
        if cpk is None:
            raise UnknownSubject(f"no passport key agreed with {dest_domain}")
        return stamp_outbound(pkt, cvk, cpk, now)

    def verify(self, pkt: MinPacket, subject: bytes, peer_domain: str, now: int) -> RejectReason | None:
        cvk = self.issued.get(subject)
        if cvk is None:
            # no visa was ever issued: nothing can make the stamp valid
            return RejectReason.BAD_VISA
        cpk = self.passport_for(peer_domain)
        if cpk is None:
            return RejectReason.BAD_PASS
        return verify_inbound(pkt, cvk, cpk, now, self.skew_windows, self.replay)

    def revoke(self, subject: bytes, registry_hook: VisaRegistryHook | None = None):
        cvk = self.issued.get(subject)
        if cvk is None:
            raise UnknownSubject(f"no visa issued to {subject.hex()[:16]}")
        cvk.revoked = True
        if registry_hook is not None:
            return registry_hook.submit_revocation(subject, self.domain)
        return None


def revoke_visa(authority: CustomsAuthority, subject: bytes,
                registry_hook: VisaRegistryHook | None = None):
    """Revoke a subject's visa at its issuing authority; later verifications
    reject with Revoked. Returns the registry ticket when a hook is wired."""
    return authority.revoke(subject, registry_hook)


# --- key files -------------------------------------------------------------
#
# line format:
#   cvk <subject-hex> <domain> <expiry> <key-hex>
#   cpk <domainA> <domainB> <key-hex>

def dump_key_file(path, cvks=(), cpks=()):
    with open(path, "w", encoding="utf-8") as fh:
        for k in cvks:
            fh.write(f"cvk {k.subject.hex()} {k.issuing_domain} {k.expiry} {k.cvk.hex()}\n")
        for k in cpks:
            a, b = k.domain_pair
            fh.write(f"cpk {a} {b} {k.cpk.hex()}\n")


def load_key_file(path) -> tuple[list[CyberVisaKey], list[CyberPassKey]]:
    cvks, cpks = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                if parts[0] == "cvk" and len(parts) == 5:
                    cvks.append(CyberVisaKey(
                        bytes.fromhex(parts[4]), bytes.fromhex(parts[1]), parts[2], int(parts[3])))
                elif parts[0] == "cpk" and len(parts) == 4:
                    cpks.append(CyberPassKey(bytes.fromhex(parts[3]), (parts[1], parts[2])))
                else:
                    raise ValueError("unrecognized record")
            except (ValueError, InvariantViolation) as exc:
                raise InvariantViolation(f"{path}:{lineno}: bad key record ({exc})") from exc
    return cvks, cpks
