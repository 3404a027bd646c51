"""Bit-exact TLV codec for network packets.

Wire grammar: a 1-octet type code, then a length (one octet below 253;
markers 253/254/255 introduce a 2/4/8-octet big-endian length, minimal form
only), then the value. A packet is one outer element whose type is the
packet kind; its value tiles exactly into the four areas in fixed order:

    0x10 identifier area     one or more 0x20 identifier elements
    0x11 signature area      0x30 algorithm, 0x31 signer id, 0x32 signature
    0x12 read-only area      0x40 timestamp, [0x41 visa], [0x42 pass], 0x43 nonce
    0x13 variable area       0x50 payload, 0x51 hop limit

Inside every container the known elements appear in ascending type-code
order; elements with codes >= 0x80 are opaque extensions, must trail the
known ones, and survive decode/encode verbatim. decode is total: any input
either yields the unique packet whose canonical encoding it is, or raises a
CodecError subclass.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from enum import IntEnum

from minnet import _kernels as _k
from minnet.errors import (
    InvariantViolation,
    LengthMismatch,
    NonCanonicalEncoding,
    TruncatedInput,
    UnknownAlgorithm,
    UnknownCriticalType,
)
from minnet.identifier import Identifier, IdType

T_INTEREST = 0x05
T_DATA = 0x06
T_GPPKT = 0x07

T_ID_AREA = 0x10
T_SIG_AREA = 0x11
T_RO_AREA = 0x12
T_VAR_AREA = 0x13

T_IDENTIFIER = 0x20
T_ID_TYPE = 0x21
T_ID_VALUE = 0x22

T_SIG_ALG = 0x30
T_SIGNER_ID = 0x31
T_SIGNATURE = 0x32

T_TIMESTAMP = 0x40
T_CYBER_VISA = 0x41
T_CYBER_PASS = 0x42
T_NONCE = 0x43

T_PAYLOAD = 0x50
T_HOP_LIMIT = 0x51

EXTENSION_FLOOR = 0x80

ALG_ED25519 = 0x01

NONCE_LEN = 8
DIGEST_LEN = 32


class PacketKind(IntEnum):
    INTEREST = T_INTEREST
    DATA = T_DATA
    GPPKT = T_GPPKT


@dataclass(frozen=True)
class TlvElement:
    type_code: int
    value: bytes

    def __post_init__(self):
        if not 0 <= self.type_code <= 0xFF:
            raise InvariantViolation("type code is one octet")
        object.__setattr__(self, "value", bytes(self.value))


@dataclass(frozen=True)
class SignatureBlock:
    algorithm: int
    signer_id: bytes
    signature: bytes
    extensions: tuple[TlvElement, ...] = ()

    def __post_init__(self):
        if self.algorithm != ALG_ED25519:
            raise UnknownAlgorithm(f"unsupported signature algorithm {self.algorithm:#x}")
        if len(self.signer_id) != DIGEST_LEN:
            raise InvariantViolation("signer id is a 32-octet digest")
        if not self.signature:
            raise InvariantViolation("empty signature")


@dataclass(frozen=True)
class ReadOnlyArea:
    timestamp: int
    nonce: bytes
    cyber_visa: bytes | None = None
    cyber_pass: bytes | None = None
    extensions: tuple[TlvElement, ...] = ()

    def __post_init__(self):
        if not 0 <= self.timestamp < 1 << 64:
            raise InvariantViolation("timestamp is an unsigned 64-bit second count")
        if len(self.nonce) != NONCE_LEN:
            raise InvariantViolation("nonce is 8 octets")
        for name in ("cyber_visa", "cyber_pass"):
            v = getattr(self, name)
            if v is not None and len(v) != DIGEST_LEN:
                raise InvariantViolation(f"{name} is 32 octets")
        if self.cyber_pass is not None and self.cyber_visa is None:
            raise InvariantViolation("cyber_pass requires cyber_visa")


@dataclass(frozen=True)
class VariableArea:
    payload: bytes = b""
    hop_limit: int = 64
    extensions: tuple[TlvElement, ...] = ()

    def __post_init__(self):
        if not 0 <= self.hop_limit <= 255:
            raise InvariantViolation("hop limit is 0-255")
        object.__setattr__(self, "payload", bytes(self.payload))


@dataclass(frozen=True)
class MinPacket:
    kind: PacketKind
    identifiers: tuple[Identifier, ...]
    readonly: ReadOnlyArea
    variable: VariableArea
    signature: SignatureBlock | None = None
    id_extensions: tuple[TlvElement, ...] = ()
    extensions: tuple[TlvElement, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "identifiers", tuple(self.identifiers))
        if not self.identifiers:
            raise InvariantViolation("identifier area needs at least one identifier")

    def check_signature_presence(self) -> None:
        """Wire invariant: Data and push packets carry a signature area.
        An unsigned Data may exist in memory only on its way to sign_packet."""
        if self.kind in (PacketKind.DATA, PacketKind.GPPKT) and self.signature is None:
            raise InvariantViolation(f"{self.kind.name} packets carry a signature area")

    @property
    def name(self) -> Identifier:
        return self.identifiers[0]

    def with_hop_limit(self, hop_limit: int) -> "MinPacket":
        return replace(self, variable=replace(self.variable, hop_limit=hop_limit))


def element(type_code: int, value: bytes) -> bytes:
    return _k.encode_tl(type_code, len(value)) + value


def _ext_bytes(extensions) -> bytes:
    return b"".join(element(e.type_code, e.value) for e in extensions)


def encode_identifier(ident: Identifier) -> bytes:
    inner = element(T_ID_TYPE, bytes((ident.id_type,)))
    inner += b"".join(element(T_ID_VALUE, c) for c in ident.components)
    return element(T_IDENTIFIER, inner)


def _encode_id_area(pkt: MinPacket) -> bytes:
    body = b"".join(encode_identifier(i) for i in pkt.identifiers)
    return element(T_ID_AREA, body + _ext_bytes(pkt.id_extensions))


def _encode_sig_area(sig: SignatureBlock) -> bytes:
    body = (
        element(T_SIG_ALG, bytes((sig.algorithm,)))
        + element(T_SIGNER_ID, sig.signer_id)
        + element(T_SIGNATURE, sig.signature)
        + _ext_bytes(sig.extensions)
    )
    return element(T_SIG_AREA, body)


def _encode_ro_area(ro: ReadOnlyArea) -> bytes:
    body = element(T_TIMESTAMP, ro.timestamp.to_bytes(8, "big"))
    if ro.cyber_visa is not None:
        body += element(T_CYBER_VISA, ro.cyber_visa)
    if ro.cyber_pass is not None:
        body += element(T_CYBER_PASS, ro.cyber_pass)
    body += element(T_NONCE, ro.nonce)
    return element(T_RO_AREA, body + _ext_bytes(ro.extensions))


def _encode_var_area(var: VariableArea) -> bytes:
    body = element(T_PAYLOAD, var.payload) + element(T_HOP_LIMIT, bytes((var.hop_limit,)))
    return element(T_VAR_AREA, body + _ext_bytes(var.extensions))


def encode_packet(pkt: MinPacket) -> bytes:
    """Canonical octet string for a packet; decode_packet inverts it exactly."""
    pkt.check_signature_presence()
    parts = [_encode_id_area(pkt)]
    if pkt.signature is not None:
        parts.append(_encode_sig_area(pkt.signature))
    parts.append(_encode_ro_area(pkt.readonly))
    parts.append(_encode_var_area(pkt.variable))
    parts.append(_ext_bytes(pkt.extensions))
    body = b"".join(parts)
    return _k.encode_tl(int(pkt.kind), len(body)) + body


class _Fields:
    """Walks a container's children enforcing canonical layout: known codes
    strictly ascending (repeatable ones may repeat), extensions trailing."""

    def __init__(self, buf: bytes, children, known: frozenset[int]):
        self.buf = buf
        self.children = children
        self.known = known
        self.pos = 0
        self.last_code = -1
        for t, _, _ in children:
            if t < EXTENSION_FLOOR and t not in known:
                raise UnknownCriticalType(f"type {t:#04x} not defined in this container")

    def _peek(self):
        if self.pos >= len(self.children):
            return None
        return self.children[self.pos]

    def take(self, code: int, *, size: int | None = None) -> bytes | None:
        """Next child if it has this code; enforces ascending order."""
        nxt = self._peek()
        if nxt is None or nxt[0] != code:
            return None
        if code <= self.last_code and code != self.last_code:
            raise NonCanonicalEncoding("elements out of canonical order")
        t, vs, ve = nxt
        self.pos += 1
        self.last_code = code
        v = self.buf[vs:ve]
        if size is not None and len(v) != size:
            raise LengthMismatch(f"element {code:#04x} wants {size} octets, got {len(v)}")
        return v

    def require(self, code: int, *, size: int | None = None) -> bytes:
        v = self.take(code, size=size)
        if v is None:
            raise NonCanonicalEncoding(f"missing required element {code:#04x}")
        return v

    def take_repeated(self, code: int) -> list[bytes]:
        out = []
        while True:
            nxt = self._peek()
            if nxt is None or nxt[0] != code:
                break
            t, vs, ve = nxt
            self.pos += 1
            self.last_code = code
            out.append(self.buf[vs:ve])
        return out

    def extensions(self) -> tuple[TlvElement, ...]:
        out = []
        while True:
            nxt = self._peek()
            if nxt is None:
                break
            t, vs, ve = nxt
            if t < EXTENSION_FLOOR:
                raise NonCanonicalEncoding(f"element {t:#04x} after extension region or out of order")
            self.pos += 1
            out.append(TlvElement(t, self.buf[vs:ve]))
        return tuple(out)


def decode_identifier(buf: bytes, start: int, end: int) -> Identifier:
    f = _Fields(buf, _k.scan_elements(buf, start, end), frozenset((T_ID_TYPE, T_ID_VALUE)))
    raw_type = f.require(T_ID_TYPE, size=1)
    comps = f.take_repeated(T_ID_VALUE)
    if f.pos != len(f.children):
        raise NonCanonicalEncoding("unexpected element inside identifier")
    try:
        t = IdType(raw_type[0])
    except ValueError as exc:
        raise InvariantViolation(f"unknown identifier type {raw_type[0]}") from exc
    return Identifier(t, tuple(comps))


def _decode_id_area(buf: bytes, start: int, end: int):
    f = _Fields(buf, _k.scan_elements(buf, start, end), frozenset((T_IDENTIFIER,)))
    idents = []
    while True:
        nxt = f._peek()
        if nxt is None or nxt[0] != T_IDENTIFIER:
            break
        _, vs, ve = nxt
        f.pos += 1
        f.last_code = T_IDENTIFIER
        idents.append(decode_identifier(buf, vs, ve))
    exts = f.extensions()
    return tuple(idents), exts


def _decode_sig_area(buf: bytes, start: int, end: int) -> SignatureBlock:
    known = frozenset((T_SIG_ALG, T_SIGNER_ID, T_SIGNATURE))
    f = _Fields(buf, _k.scan_elements(buf, start, end), known)
    alg = f.require(T_SIG_ALG, size=1)[0]
    if alg != ALG_ED25519:
        raise UnknownAlgorithm(f"unsupported signature algorithm {alg:#x}")
    signer = f.require(T_SIGNER_ID, size=DIGEST_LEN)
    sig = f.require(T_SIGNATURE)
    return SignatureBlock(alg, signer, sig, f.extensions())


def _decode_ro_area(buf: bytes, start: int, end: int) -> ReadOnlyArea:
    known = frozenset((T_TIMESTAMP, T_CYBER_VISA, T_CYBER_PASS, T_NONCE))
    f = _Fields(buf, _k.scan_elements(buf, start, end), known)
    ts = f.require(T_TIMESTAMP, size=8)
    visa = f.take(T_CYBER_VISA, size=DIGEST_LEN)
    cpass = f.take(T_CYBER_PASS, size=DIGEST_LEN)
    nonce = f.require(T_NONCE, size=NONCE_LEN)
    return ReadOnlyArea(int.from_bytes(ts, "big"), nonce, visa, cpass, f.extensions())


def _decode_var_area(buf: bytes, start: int, end: int) -> VariableArea:
    known = frozenset((T_PAYLOAD, T_HOP_LIMIT))
    f = _Fields(buf, _k.scan_elements(buf, start, end), known)
    payload = f.require(T_PAYLOAD)
    hop = f.require(T_HOP_LIMIT, size=1)[0]
    return VariableArea(payload, hop, f.extensions())


def decode_packet(data: bytes) -> MinPacket:
    """Decode an octet string; total over arbitrary input (raises CodecError)."""
    buf = bytes(data)
    if len(buf) == 0:
        raise TruncatedInput("empty input")
    kind_code, length, voff = _k.read_tl(buf, 0, len(buf))
    vend = voff + length
    if vend > len(buf):
        raise TruncatedInput("packet body truncated")
    if kind_code not in (T_INTEREST, T_DATA, T_GPPKT):
        raise UnknownCriticalType(f"unknown packet kind {kind_code:#04x}")
    if vend != len(buf):
        raise LengthMismatch(f"{len(buf) - vend} trailing octets after packet")

    known = frozenset((T_ID_AREA, T_SIG_AREA, T_RO_AREA, T_VAR_AREA))
    f = _Fields(buf, _k.scan_elements(buf, voff, vend), known)

    def area(code: int, required: bool):
        nxt = f._peek()
        if nxt is None or nxt[0] != code:
            if required:
                raise NonCanonicalEncoding(f"missing area {code:#04x}")
            return None
        _, vs, ve = nxt
        f.pos += 1
        f.last_code = code
        return vs, ve

    ids_span = area(T_ID_AREA, required=True)
    sig_span = area(T_SIG_AREA, required=False)
    ro_span = area(T_RO_AREA, required=True)
    var_span = area(T_VAR_AREA, required=True)
    exts = f.extensions()

    identifiers, id_exts = _decode_id_area(buf, *ids_span)
    signature = _decode_sig_area(buf, *sig_span) if sig_span else None
    readonly = _decode_ro_area(buf, *ro_span)
    variable = _decode_var_area(buf, *var_span)
    pkt = MinPacket(
        PacketKind(kind_code), identifiers, readonly, variable, signature, id_exts, exts
    )
    pkt.check_signature_presence()
    return pkt


def signed_bytes(pkt: MinPacket) -> bytes:
    """Stable projection the packet signature covers.

    Excludes the fields a conforming relay rewrites in flight (timestamp,
    customs stamps, hop limit) so one signature survives border stamping and
    hop-limit decrements; everything else, including extension elements, is
    bound.
    """
    ro = element(T_RO_AREA, element(T_NONCE, pkt.readonly.nonce) + _ext_bytes(pkt.readonly.extensions))
    var = element(T_VAR_AREA, element(T_PAYLOAD, pkt.variable.payload) + _ext_bytes(pkt.variable.extensions))
    return bytes((int(pkt.kind),)) + _encode_id_area(pkt) + ro + var + _ext_bytes(pkt.extensions)


def packet_digest(pkt: MinPacket) -> bytes:
    """Hop-stable digest used for audit records and tracing."""
    return hashlib.sha256(signed_bytes(pkt)).digest()


def format_packet(pkt: MinPacket) -> str:
    """Human-readable rendering for the CLI decoder."""
    lines = [f"{pkt.kind.name.lower()}  hop_limit={pkt.variable.hop_limit}"]
    for ident in pkt.identifiers:
        lines.append(f"  identifier  {ident}")
    if pkt.signature is not None:
        s = pkt.signature
        lines.append(f"  signature   alg={s.algorithm:#04x} signer={s.signer_id.hex()}")
        lines.append(f"              sig={s.signature.hex()}")
    ro = pkt.readonly
    lines.append(f"  readonly    timestamp={ro.timestamp} nonce={ro.nonce.hex()}")
    if ro.cyber_visa is not None:
        lines.append(f"              visa={ro.cyber_visa.hex()}")
    if ro.cyber_pass is not None:
        lines.append(f"              pass={ro.cyber_pass.hex()}")
    payload = pkt.variable.payload
    shown = payload[:48].hex() + ("..." if len(payload) > 48 else "")
    lines.append(f"  payload     {len(payload)} octets {shown}")
    for e in pkt.extensions + pkt.id_extensions:
        lines.append(f"  extension   type={e.type_code:#04x} {e.value.hex()}")
    lines.append(f"  digest      {packet_digest(pkt).hex()}")
    return "\n".join(lines)
