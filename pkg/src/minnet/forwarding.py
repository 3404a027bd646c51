"""Name-based forwarding: FIB, PIT, CS, and the per-packet-kind flow.

A router consumes decoded-or-raw packets from a face and returns the copies
to emit. Interests check the content store first, then aggregate on the
pending-interest table, then follow the longest matching FIB prefix of the
best reachable identifier. Data answers pending interests and is cached
(exact LRU); push packets follow the FIB only. Every arrival gets exactly
one disposition, which keeps the simulator's conservation accounting exact.
"""

from __future__ import annotations

from collections import OrderedDict, deque
from dataclasses import dataclass, field
from enum import Enum

from minnet import codec, customs as customs_mod, identity as identity_mod
from minnet.codec import MinPacket, PacketKind
from minnet.errors import CodecError, NoRoute, NoValidIdentifier
from minnet.identifier import Identifier, is_prefix, sort_candidates
from minnet.identity import Verdict, VerifyReject


@dataclass(frozen=True)
class FibEntry:
    prefix: Identifier
    faces: tuple[tuple[int, int], ...]  # (face id, cost), no duplicate faces

    def __post_init__(self):
        ids = [f for f, _ in self.faces]
        if not ids or len(set(ids)) != len(ids):
            raise ValueError("fib entry needs a non-empty, duplicate-free face list")

    def faces_by_cost(self) -> list[int]:
        return [f for f, _ in sorted(self.faces, key=lambda fc: (fc[1], fc[0]))]


class Fib:
    def __init__(self):
        self._entries: dict[Identifier, FibEntry] = {}

    def add(self, prefix: Identifier, face: int, cost: int = 0) -> None:
        old = self._entries.get(prefix)
        faces = tuple(fc for fc in (old.faces if old else ()) if fc[0] != face) + ((face, cost),)
        self._entries[prefix] = FibEntry(prefix, faces)

    def lookup(self, ident: Identifier) -> FibEntry:
        """Longest matching prefix; faces come back cheapest first."""
        best = None
        best_len = -1
        for prefix, entry in self._entries.items():
            if is_prefix(prefix, ident) and len(prefix.components) > best_len:
                best, best_len = entry, len(prefix.components)
        if best is None:
            raise NoRoute(f"no forwarding entry matches {ident}")
        return best

    def has_route(self, ident: Identifier) -> bool:
        try:
            self.lookup(ident)
            return True
        except NoRoute:
            return False

    def __len__(self):
        return len(self._entries)


@dataclass
class PitEntry:
    key: tuple
    in_faces: set[tuple[int, bytes]]  # (face, nonce)
    expiry: int
    upstream_nonce: bytes


@dataclass
class CsEntry:
    packet: MinPacket
    inserted: int
    last_used: int


class ContentStore:
    """Bounded LRU cache of verified Data packets."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._store: "OrderedDict[tuple, CsEntry]" = OrderedDict()

    def get(self, key: tuple, now: int) -> MinPacket | None:
        entry = self._store.get(key)
        if entry is None:
            return None
        entry.last_used = now
        self._store.move_to_end(key)
        return entry.packet

    def insert(self, key: tuple, pkt: MinPacket, now: int) -> None:
        if self.capacity <= 0:
            return
        if key in self._store:
            self._store.move_to_end(key)
            self._store[key] = CsEntry(pkt, now, now)
            return
        if len(self._store) >= self.capacity:
            self._store.popitem(last=False)
        self._store[key] = CsEntry(pkt, now, now)

    def __len__(self):
        return len(self._store)

    def keys(self):
        return list(self._store)


class Disposition(Enum):
    FORWARDED = "forwarded"
    CS_HIT = "cs_hit"
    AGGREGATED = "aggregated"
    DROPPED = "dropped"


@dataclass
class Outcome:
    disposition: Disposition
    emissions: list[tuple[int, MinPacket]] = field(default_factory=list)
    drop_reason: str | None = None
    detail: str = ""


DEAD_NONCE_CAPACITY = 1 << 16


@dataclass(frozen=True)
class FacePeer:
    name: str
    kind: str       # "host" | "mir" | "border"
    domain: str


def pit_key(pkt: MinPacket) -> tuple:
    return tuple(pkt.identifiers)


class Router:
    """One forwarding element; single-threaded, driven by (packet, face, now)."""

    def __init__(
        self,
        name: str,
        domain: str = "",
        *,
        cs_capacity: int = 64,
        pit_lifetime_ms: int = 4000,
        directory=None,
        customs: "customs_mod.CustomsAuthority | None" = None,
        verify_user_sigs: str = "edge",
        audit: identity_mod.AuditLog | None = None,
        cache_data: bool = True,
    ):
        self.name = name
        self.domain = domain
        self.fib = Fib()
        self.pit: dict[tuple, PitEntry] = {}
        self.cs = ContentStore(cs_capacity)
        self.pit_lifetime_ms = pit_lifetime_ms
        self.directory = directory
        self.customs = customs
        self.verify_user_sigs = verify_user_sigs
        self.audit = audit or identity_mod.AuditLog(name)
        self.cache_data = cache_data
        self.faces: dict[int, FacePeer] = {}
        self._dead_nonces: set[tuple] = set()
        self._dead_order: deque = deque()
        self.counters: dict[str, int] = {
            "interests_in": 0,
            "data_in": 0,
            "gppkt_in": 0,
            "cs_hits": 0,
            "pit_aggregations": 0,
            "forwarded": 0,
            "pit_expired": 0,
        }
        self.drops_by_reason: dict[str, int] = {}
        # taps: the last stamped packet sent per cross-domain face (attack capture)
        self.egress_tap: dict[int, bytes] = {}

    # --- wiring ---------------------------------------------------------

    def add_face(self, face_id: int, peer: FacePeer) -> None:
        self.faces[face_id] = peer

    def add_route(self, prefix: Identifier, face: int, cost: int = 0) -> None:
        self.fib.add(prefix, face, cost)

    # --- helpers --------------------------------------------------------

    def _drop(self, reason: str, detail: str = "") -> Outcome:
        self.drops_by_reason[reason] = self.drops_by_reason.get(reason, 0) + 1
        return Outcome(Disposition.DROPPED, drop_reason=reason, detail=detail)

    def _note_dead_nonce(self, key: tuple, nonce: bytes) -> None:
        pair = (key, nonce)
        if pair in self._dead_nonces:
            return
        self._dead_nonces.add(pair)
        self._dead_order.append(pair)
        while len(self._dead_order) > DEAD_NONCE_CAPACITY:
            self._dead_nonces.discard(self._dead_order.popleft())

    def _seen_nonce(self, key: tuple, nonce: bytes) -> bool:
        return (key, nonce) in self._dead_nonces

    def _is_cross_domain(self, face: int) -> bool:
        peer = self.faces.get(face)
        return peer is not None and peer.domain != self.domain

    def _should_verify_user(self, in_face: int) -> bool:
        if self.verify_user_sigs == "always":
            return True
        if self.verify_user_sigs == "never":
            return False
        peer = self.faces.get(in_face)
        if peer is None:
            return False
        return peer.kind == "host" or self._is_cross_domain(in_face)

    def _audit_drop(self, pkt: MinPacket, now: int, verdict: Verdict) -> None:
        signer = pkt.signature.signer_id if pkt.signature else b"\x00" * 32
        self.audit.append(now, signer, codec.packet_digest(pkt), verdict)

    def _audit_forward(self, pkt: MinPacket, now: int) -> None:
        signer = pkt.signature.signer_id if pkt.signature else b"\x00" * 32
        self.audit.append(now, signer, codec.packet_digest(pkt), Verdict.FORWARDED)

    def purge_expired_pit(self, now: int) -> int:
        gone = [k for k, e in self.pit.items() if e.expiry <= now]
        for k in gone:
            del self.pit[k]
        self.counters["pit_expired"] += len(gone)
        return len(gone)

    # --- entry points -----------------------------------------------------

    def handle_wire(self, data: bytes, in_face: int, now: int) -> Outcome:
        try:
            pkt = codec.decode_packet(data)
        except CodecError as exc:
            return self._drop("DecodeError", str(exc))
        return self.handle_packet(pkt, in_face, now)

    def handle_packet(self, pkt: MinPacket, in_face: int, now: int) -> Outcome:
        self.purge_expired_pit(now)
        kind_counter = {
            PacketKind.INTEREST: "interests_in",
            PacketKind.DATA: "data_in",
            PacketKind.GPPKT: "gppkt_in",
        }[pkt.kind]
        self.counters[kind_counter] += 1

        # identity gate (edge policy: host-facing and cross-domain ingress)
        if pkt.kind == PacketKind.DATA or self._should_verify_user(in_face):
            if self.directory is not None:
                why = identity_mod.verify_packet(pkt, self.directory)
                if why is not None:
                    verdict = {
                        VerifyReject.BANNED: Verdict.DROPPED_BANNED,
                    }.get(why, Verdict.DROPPED_BAD_SIG)
                    self._audit_drop(pkt, now, verdict)
                    return self._drop(why.value)

        # customs gate on cross-domain ingress
        if self.customs is not None and self._is_cross_domain(in_face):
            peer = self.faces[in_face]
            subject = pkt.signature.signer_id if pkt.signature else b"\x00" * 32
            why = self.customs.verify(pkt, subject, peer.domain, now // 1000)
            if why is not None:
                self._audit_drop(pkt, now, Verdict.DROPPED_CUSTOMS)
                return self._drop(why.value)

        if pkt.variable.hop_limit == 0:
            return self._drop("HopLimitExceeded")

        if pkt.kind == PacketKind.INTEREST:
            out = self._on_interest(pkt, in_face, now)
        elif pkt.kind == PacketKind.DATA:
            out = self._on_data(pkt, in_face, now)
        else:
            out = self._on_gppkt(pkt, in_face, now)

        if out.disposition in (Disposition.FORWARDED, Disposition.CS_HIT):
            out.emissions = list(self._stamp_egress(out.emissions, now))
            if not out.emissions:
                return self._drop("NoOutboundVisa")
            if out.disposition is Disposition.FORWARDED:
                self.counters["forwarded"] += 1
                self._audit_forward(pkt, now)
            else:
                # a cache hit emits a stored Data packet: that is the packet
                # whose traversal the audit trail must attribute
                self._audit_forward(out.emissions[0][1], now)
        return out

    def _stamp_egress(self, emissions, now: int):
        for face, pkt in emissions:
            if self.customs is not None and self._is_cross_domain(face):
                peer = self.faces[face]
                subject = pkt.signature.signer_id if pkt.signature else b"\x00" * 32
                try:
                    pkt = self.customs.stamp(pkt, subject, peer.domain, now // 1000)
                except Exception:
                    continue  # no visa key held: the copy is dropped
                self.egress_tap[face] = codec.encode_packet(pkt)
            yield face, pkt

    # --- per-kind flows -----------------------------------------------------

    def _best_face(self, pkt: MinPacket, in_face: int) -> int | None:
        try:
            winners = sort_candidates(list(pkt.identifiers), self.fib.has_route)
        except NoValidIdentifier:
            return None
        fib_entry = self.fib.lookup(winners[0])
        return next((f for f in fib_entry.faces_by_cost() if f != in_face), None)

    def _on_interest(self, pkt: MinPacket, in_face: int, now: int) -> Outcome:
        key = pit_key(pkt)
        nonce = pkt.readonly.nonce

        cached = self.cs.get(key, now)
        if cached is not None:
            self.counters["cs_hits"] += 1
            reply = cached.with_hop_limit(cached.variable.hop_limit - 1)
            return Outcome(Disposition.CS_HIT, [(in_face, reply)])

        if self._seen_nonce(key, nonce):
            return self._drop("LoopNonce")
        self._note_dead_nonce(key, nonce)

        entry = self.pit.get(key)
        if entry is not None:
            entry.in_faces.add((in_face, nonce))
            self.counters["pit_aggregations"] += 1
            return Outcome(Disposition.AGGREGATED)

        out_face = self._best_face(pkt, in_face)
        if out_face is None:
            return self._drop("NoRoute")

        self.pit[key] = PitEntry(
            key=key,
            in_faces={(in_face, nonce)},
            expiry=now + self.pit_lifetime_ms,
            upstream_nonce=nonce,
        )
        fwd = pkt.with_hop_limit(pkt.variable.hop_limit - 1)
        return Outcome(Disposition.FORWARDED, [(out_face, fwd)])

    def _on_data(self, pkt: MinPacket, in_face: int, now: int) -> Outcome:
        key = pit_key(pkt)
        entry = self.pit.pop(key, None)
        if entry is None:
            return self._drop("UnsolicitedData")
        if self.cache_data:
            self.cs.insert(key, pkt, now)
        fwd = pkt.with_hop_limit(pkt.variable.hop_limit - 1)
        emissions = [(face, fwd) for face in sorted({f for f, _ in entry.in_faces})]
        return Outcome(Disposition.FORWARDED, emissions)

    def _on_gppkt(self, pkt: MinPacket, in_face: int, now: int) -> Outcome:
        out_face = self._best_face(pkt, in_face)
        if out_face is None:
            return self._drop("NoRoute")
        fwd = pkt.with_hop_limit(pkt.variable.hop_limit - 1)
        return Outcome(Disposition.FORWARDED, [(out_face, fwd)])
