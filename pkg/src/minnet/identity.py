"""Cryptographic user identities, packet signing, and the audit trail.

An identity is an Ed25519 keypair; its digest is SHA-256 of the 32-octet raw
public key. Packets are signed over the stable projection from
``codec.signed_bytes`` so border stamping and hop-limit decrements do not
invalidate signatures. Every router keeps an append-only audit chain whose
records each bind the hash of their predecessor.
"""

from __future__ import annotations

import hashlib
import os
import random
from dataclasses import dataclass, replace
from enum import Enum

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from minnet import _kernels as _k
from minnet.codec import ALG_ED25519, MinPacket, SignatureBlock, element, packet_digest, signed_bytes
from minnet.errors import (
    BannedIdentity,
    DuplicateBiometric,
    InvariantViolation,
    TruncatedInput,
    UnknownIdentity,
)


class IdentityStatus(Enum):
    ACTIVE = "Active"
    BANNED = "Banned"


@dataclass
class IdentityRecord:
    id_digest: bytes
    public_key: bytes
    real_info_digest: bytes
    biometric_digest: bytes
    status: IdentityStatus
    domain: str

    def __post_init__(self):
        for name in ("id_digest", "real_info_digest", "biometric_digest"):
            if len(getattr(self, name)) != 32:
                raise InvariantViolation(f"{name} is 32 octets")
        if len(self.public_key) != 32:
            raise InvariantViolation("raw Ed25519 public key is 32 octets")
        if self.id_digest != hashlib.sha256(self.public_key).digest():
            raise InvariantViolation("id_digest is SHA-256 of the public key")


def key_digest(public_key: bytes) -> bytes:
    return hashlib.sha256(public_key).digest()


def generate_keypair(rng: random.Random | None = None) -> tuple[bytes, bytes]:
    """(secret, public) raw 32-octet pair; seeded rng gives reproducible keys."""
    seed = rng.randbytes(32) if rng is not None else os.urandom(32)
    sk = Ed25519PrivateKey.from_private_bytes(seed)
    pub = sk.public_key().public_bytes_raw()
    return seed, pub


def sign_raw(secret: bytes, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(secret).sign(message)


def verify_raw(public_key: bytes, signature: bytes, message: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


class Directory:
    """View of registered identities: the committed registry state exposes one
    of these per node; a standalone instance backs unit tests."""

    def __init__(self):
        self._records: dict[bytes, IdentityRecord] = {}
        self._banned_biometrics: set[bytes] = set()

    def __len__(self) -> int:
        return len(self._records)

    def get(self, id_digest: bytes) -> IdentityRecord | None:
        return self._records.get(id_digest)

    def biometric_banned(self, biometric_digest: bytes) -> bool:
        return biometric_digest in self._banned_biometrics

    def register(self, record: IdentityRecord) -> None:
        if self.biometric_banned(record.biometric_digest):
            raise DuplicateBiometric("biometric digest is bound to a banned identity")
        self._records[record.id_digest] = record

    def ban(self, id_digest: bytes) -> None:
        rec = self._records.get(id_digest)
        if rec is None:
            raise UnknownIdentity(f"no identity {id_digest.hex()[:16]}")
        rec.status = IdentityStatus.BANNED
        self._banned_biometrics.add(rec.biometric_digest)


def generate_identity(
    real_info_digest: bytes,
    biometric_digest: bytes,
    domain: str,
    directory: Directory | None = None,
    rng: random.Random | None = None,
) -> tuple[IdentityRecord, bytes]:
    """Fresh keypair and Active record; registers into the directory when one
    is given. DuplicateBiometric blocks re-entry of a banned person."""
    if directory is not None and directory.biometric_banned(biometric_digest):
        raise DuplicateBiometric("biometric digest is bound to a banned identity")
    secret, pub = generate_keypair(rng)
    record = IdentityRecord(
        id_digest=key_digest(pub),
        public_key=pub,
        real_info_digest=bytes(real_info_digest),
        biometric_digest=bytes(biometric_digest),
        status=IdentityStatus.ACTIVE,
        domain=domain,
    )
    if directory is not None:
        directory.register(record)
    return record, secret


def sign_packet(pkt: MinPacket, secret: bytes, directory: Directory | None = None) -> MinPacket:
    """Attach a signature block; refuses to sign for a banned identity when a
    directory is supplied."""
    sk = Ed25519PrivateKey.from_private_bytes(secret)
    pub = sk.public_key().public_bytes_raw()
    signer = key_digest(pub)
    if directory is not None:
        rec = directory.get(signer)
        if rec is not None and rec.status is IdentityStatus.BANNED:
            raise BannedIdentity(f"identity {signer.hex()[:16]} is banned")
    sig = sk.sign(signed_bytes(pkt))
    return replace(pkt, signature=SignatureBlock(ALG_ED25519, signer, sig))


class VerifyReject(Enum):
    UNKNOWN_SIGNER = "UnknownSigner"
    BANNED = "Banned"
    BAD_SIGNATURE = "BadSignature"
    MISSING_SIGNATURE = "MissingSignature"


def verify_packet(pkt: MinPacket, directory: Directory) -> VerifyReject | None:
    """None iff the signer is registered, Active, and the signature is valid
    over the packet's stable projection."""
    if pkt.signature is None:
        return VerifyReject.MISSING_SIGNATURE
    rec = directory.get(pkt.signature.signer_id)
    if rec is None:
        return VerifyReject.UNKNOWN_SIGNER
    if rec.status is IdentityStatus.BANNED:
        return VerifyReject.BANNED
    if not verify_raw(rec.public_key, pkt.signature.signature, signed_bytes(pkt)):
        return VerifyReject.BAD_SIGNATURE
    return None


# --- audit trail -----------------------------------------------------------

class Verdict(Enum):
    FORWARDED = "Forwarded"
    DROPPED_BAD_SIG = "DroppedBadSig"
    DROPPED_BANNED = "DroppedBanned"
    DROPPED_CUSTOMS = "DroppedCustoms"

_VERDICT_CODE = {v: i for i, v in enumerate(Verdict, start=1)}
_VERDICT_BY_CODE = {i: v for v, i in _VERDICT_CODE.items()}

_F_SEQ, _F_TIME, _F_SIGNER, _F_PKT, _F_ROUTER, _F_VERDICT, _F_PREV = range(1, 8)


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    time: int
    signer: bytes
    packet_digest: bytes
    router: str
    verdict: Verdict
    prev_hash: bytes

    def canonical_bytes(self) -> bytes:
        return b"".join(
            (
                element(_F_SEQ, self.seq.to_bytes(8, "big")),
                element(_F_TIME, self.time.to_bytes(8, "big")),
                element(_F_SIGNER, self.signer),
                element(_F_PKT, self.packet_digest),
                element(_F_ROUTER, self.router.encode()),
                element(_F_VERDICT, bytes((_VERDICT_CODE[self.verdict],))),
                element(_F_PREV, self.prev_hash),
            )
        )

    def record_hash(self) -> bytes:
        return hashlib.sha256(self.canonical_bytes()).digest()


class AuditLog:
    """Append-only, hash-chained per-router audit trail."""

    GENESIS = b"\x00" * 32

    def __init__(self, router: str):
        self.router = router
        self.records: list[AuditRecord] = []
        self._head = self.GENESIS

    def append(self, time: int, signer: bytes, pkt_digest: bytes, verdict: Verdict) -> AuditRecord:
        rec = AuditRecord(
            seq=len(self.records),
            time=time,
            signer=signer,
            packet_digest=pkt_digest,
            router=self.router,
            verdict=verdict,
            prev_hash=self._head,
        )
        self.records.append(rec)
        self._head = rec.record_hash()
        return rec

    @property
    def head_hash(self) -> bytes:
        return self._head

    def verify(self) -> int | None:
        """None if the chain holds; else the seq of the first bad record."""
        prev = self.GENESIS
        for i, rec in enumerate(self.records):
            if rec.seq != i or rec.prev_hash != prev or rec.router != self.router:
                return i
            prev = rec.record_hash()
        return None

    # binary form: 4-octet big-endian record length, then the canonical record
    def dump(self, path) -> None:
        with open(path, "wb") as fh:
            for rec in self.records:
                raw = rec.canonical_bytes()
                fh.write(len(raw).to_bytes(4, "big") + raw)

    @classmethod
    def load(cls, path) -> "AuditLog":
        with open(path, "rb") as fh:
            blob = fh.read()
        records = []
        off = 0
        router = ""
        while off < len(blob):
            if off + 4 > len(blob):
                raise TruncatedInput("audit record length truncated")
            n = int.from_bytes(blob[off : off + 4], "big")
            off += 4
            if off + n > len(blob):
                raise TruncatedInput("audit record truncated")
            records.append(_record_from_bytes(blob, off, off + n))
            router = records[-1].router
            off += n
        log = cls(router)
        for rec in records:
            log.records.append(rec)
            log._head = rec.record_hash()
        return log


def _record_from_bytes(buf: bytes, start: int, end: int) -> AuditRecord:
    fields = {}
    for t, vs, ve in _k.scan_elements(buf, start, end):
        fields[t] = buf[vs:ve]
    return AuditRecord(
        seq=int.from_bytes(fields[_F_SEQ], "big"),
        time=int.from_bytes(fields[_F_TIME], "big"),
        signer=fields[_F_SIGNER],
        packet_digest=fields[_F_PKT],
        router=fields[_F_ROUTER].decode(),
        verdict=_VERDICT_BY_CODE[fields[_F_VERDICT][0]],
        prev_hash=fields[_F_PREV],
    )


def trace(logs, pkt_digest: bytes) -> list[AuditRecord]:
    """All records for a packet digest across routers, ordered (router, seq)."""
    hits = [r for log in logs for r in log.records if r.packet_digest == pkt_digest]
    hits.sort(key=lambda r: (r.router, r.seq))
    return hits


def packet_trace_digest(pkt: MinPacket) -> bytes:
    """The digest audit records key on; stable across hops."""
    return packet_digest(pkt)
