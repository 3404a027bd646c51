"""Ledger-backed identifier registry.

Hierarchical domains hold identifier registrations; every mutation is a
signed transaction committed to a hash-chained ledger by a single-round
propose-and-vote protocol (round-robin proposer, strict-majority vote) --
a deliberately simplified stand-in for a full consortium consensus, behind
an interface a heavier protocol could replace.

Two digests protect each block: voters sign the content digest (header +
transactions), and the next block's prev_hash is the chain hash over the
whole block including votes, so vote tampering is as detectable as
transaction tampering.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field, replace
from enum import IntEnum

from minnet import _kernels as _k
from minnet.codec import element
from minnet.errors import (
    BadSignature,
    CodecError,
    InvariantViolation,
    NotFound,
    TruncatedInput,
    Unauthorized,
)
from minnet.identifier import Identifier, IdentifierGraph
from minnet.identity import Directory, IdentityRecord, IdentityStatus, sign_raw, verify_raw
import minnet.codec as codec


class TxKind(IntEnum):
    REGISTER_IDENTIFIER = 1
    REGISTER_IDENTITY = 2
    REVOKE = 3
    BAN = 4
    TRANSLATE_LINK = 5
    AUDIT_ANCHOR = 6


# message-level type codes (reserved range)
M_TX_SUBMIT = 0x60
M_PROPOSAL = 0x61
M_VOTE = 0x62
M_COMMIT = 0x63
M_QUERY_REQ = 0x64
M_QUERY_RESP = 0x65

# nested structures
T_BLOCK = 0x70
T_TX = 0x71
T_VOTE = 0x72

# transaction field codes
_F_KIND = 0x01
_F_SUBMITTER = 0x02
_F_SIGNATURE = 0x03
_F_IDENTIFIER = 0x10
_F_DOMAIN = 0x11
_F_ID_DIGEST = 0x12
_F_PUBLIC_KEY = 0x13
_F_REAL_INFO = 0x14
_F_BIOMETRIC = 0x15
_F_LINK_A = 0x16
_F_LINK_B = 0x17
_F_ROUTER = 0x18
_F_ANCHOR_HASH = 0x19
_F_ANCHOR_SEQ = 0x1A
_F_VISA_SUBJECT = 0x1B

# block field codes
_B_HEIGHT = 0x01
_B_PREV = 0x02
_B_TX_ROOT = 0x03
_B_PROPOSER = 0x04
_B_TIME = 0x05

_VOTE_CONTEXT = b"minnet-block-vote\x00"


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    submitter: bytes
    signature: bytes = b""
    identifier: Identifier | None = None
    domain: str = ""
    id_digest: bytes | None = None
    public_key: bytes | None = None
    real_info_digest: bytes | None = None
    biometric_digest: bytes | None = None
    link_a: Identifier | None = None
    link_b: Identifier | None = None
    router: str = ""
    anchor_hash: bytes | None = None
    anchor_seq: int | None = None
    visa_subject: bytes | None = None

    def body_bytes(self) -> bytes:
        """Canonical encoding without the signature: what the submitter signs."""
        return self._encode(include_signature=False)

    def canonical_bytes(self) -> bytes:
        return self._encode(include_signature=True)

    def digest(self) -> bytes:
        """Ticket id: digest of the full signed transaction."""
        return hashlib.sha256(self.canonical_bytes()).digest()

    def _encode(self, include_signature: bool) -> bytes:
        parts = [element(_F_KIND, bytes((self.kind,))), element(_F_SUBMITTER, self.submitter)]
        if include_signature:
            parts.append(element(_F_SIGNATURE, self.signature))
        if self.identifier is not None:
            parts.append(element(_F_IDENTIFIER, codec.encode_identifier(self.identifier)))
        if self.domain:
            parts.append(element(_F_DOMAIN, self.domain.encode()))
        for code, val in (
            (_F_ID_DIGEST, self.id_digest),
            (_F_PUBLIC_KEY, self.public_key),
            (_F_REAL_INFO, self.real_info_digest),
            (_F_BIOMETRIC, self.biometric_digest),
        ):
            if val is not None:
                parts.append(element(code, val))
        if self.link_a is not None:
            parts.append(element(_F_LINK_A, codec.encode_identifier(self.link_a)))
        if self.link_b is not None:
            parts.append(element(_F_LINK_B, codec.encode_identifier(self.link_b)))
        if self.router:
            parts.append(element(_F_ROUTER, self.router.encode()))
        if self.anchor_hash is not None:
            parts.append(element(_F_ANCHOR_HASH, self.anchor_hash))
        if self.anchor_seq is not None:
            parts.append(element(_F_ANCHOR_SEQ, self.anchor_seq.to_bytes(8, "big")))
        if self.visa_subject is not None:
            parts.append(element(_F_VISA_SUBJECT, self.visa_subject))
        return b"".join(parts)


def _decode_nested_identifier(buf: bytes, vs: int, ve: int) -> Identifier:
    elems = _k.scan_elements(buf, vs, ve)
    if len(elems) != 1 or elems[0][0] != codec.T_IDENTIFIER:
        raise InvariantViolation("expected one identifier element")
    _, s, e = elems[0]
    return codec.decode_identifier(buf, s, e)


def decode_transaction(buf: bytes, start: int, end: int) -> Transaction:
    fields: dict[int, tuple[int, int]] = {}
    for t, vs, ve in _k.scan_elements(buf, start, end):
        if t in fields:
            raise InvariantViolation("duplicate transaction field")
        fields[t] = (vs, ve)

    def raw(code):
        span = fields.get(code)
        return None if span is None else buf[span[0] : span[1]]

    def ident(code):
        span = fields.get(code)
        return None if span is None else _decode_nested_identifier(buf, *span)

    kind_raw = raw(_F_KIND)
    submitter = raw(_F_SUBMITTER)
    if kind_raw is None or len(kind_raw) != 1 or submitter is None:
        raise InvariantViolation("transaction missing kind or submitter")
    seq = raw(_F_ANCHOR_SEQ)
    return Transaction(
        kind=TxKind(kind_raw[0]),
        submitter=submitter,
        signature=raw(_F_SIGNATURE) or b"",
        identifier=ident(_F_IDENTIFIER),
        domain=(raw(_F_DOMAIN) or b"").decode(),
        id_digest=raw(_F_ID_DIGEST),
        public_key=raw(_F_PUBLIC_KEY),
        real_info_digest=raw(_F_REAL_INFO),
        biometric_digest=raw(_F_BIOMETRIC),
        link_a=ident(_F_LINK_A),
        link_b=ident(_F_LINK_B),
        router=(raw(_F_ROUTER) or b"").decode(),
        anchor_hash=raw(_F_ANCHOR_HASH),
        anchor_seq=None if seq is None else int.from_bytes(seq, "big"),
        visa_subject=raw(_F_VISA_SUBJECT),
    )


def sign_transaction(tx: Transaction, secret: bytes) -> Transaction:
    return replace(tx, signature=sign_raw(secret, tx.body_bytes()))


# --- blocks ------------------------------------------------------------------

GENESIS_PREV = b"\x00" * 32


@dataclass(frozen=True)
class LedgerBlock:
    height: int
    prev_hash: bytes
    tx_root: bytes
    proposer: str
    time: int
    txs: tuple[Transaction, ...]
    votes: tuple[tuple[str, bytes], ...] = ()

    def _encode(self, include_votes: bool) -> bytes:
        parts = [
            element(_B_HEIGHT, self.height.to_bytes(8, "big")),
            element(_B_PREV, self.prev_hash),
            element(_B_TX_ROOT, self.tx_root),
            element(_B_PROPOSER, self.proposer.encode()),
            element(_B_TIME, self.time.to_bytes(8, "big")),
        ]
        parts.extend(element(T_TX, tx.canonical_bytes()) for tx in self.txs)
        if include_votes:
            for node, sig in self.votes:
                parts.append(element(T_VOTE, element(0x01, node.encode()) + element(0x02, sig)))
        return element(T_BLOCK, b"".join(parts))

    def canonical_bytes(self) -> bytes:
        return self._encode(include_votes=True)

    def content_digest(self) -> bytes:
        """What committee members sign: header plus transactions, no votes."""
        return hashlib.sha256(self._encode(include_votes=False)).digest()

    def chain_hash(self) -> bytes:
        """What the next block's prev_hash binds: the whole block."""
        return hashlib.sha256(self.canonical_bytes()).digest()


def tx_root_of(txs) -> bytes:
    return hashlib.sha256(b"".join(tx.digest() for tx in txs)).digest()


def decode_block(buf: bytes, start: int, end: int) -> LedgerBlock:
    outer = _k.scan_elements(buf, start, end)
    if len(outer) != 1 or outer[0][0] != T_BLOCK:
        raise InvariantViolation("expected one block element")
    _, vs, ve = outer[0]
    header: dict[int, bytes] = {}
    txs: list[Transaction] = []
    votes: list[tuple[str, bytes]] = []
    for t, s, e in _k.scan_elements(buf, vs, ve):
        if t == T_TX:
            txs.append(decode_transaction(buf, s, e))
        elif t == T_VOTE:
            vfields = {ft: buf[fs:fe] for ft, fs, fe in _k.scan_elements(buf, s, e)}
            if 0x01 not in vfields or 0x02 not in vfields:
                raise InvariantViolation("vote missing node or signature")
            votes.append((vfields[0x01].decode(), vfields[0x02]))
        elif t in header:
            raise InvariantViolation("duplicate block header field")
        elif t not in (_B_HEIGHT, _B_PREV, _B_TX_ROOT, _B_PROPOSER, _B_TIME):
            raise InvariantViolation(f"unknown block field {t:#04x}")
        else:
            header[t] = buf[s:e]
    try:
        return LedgerBlock(
            height=int.from_bytes(header[_B_HEIGHT], "big"),
            prev_hash=header[_B_PREV],
            tx_root=header[_B_TX_ROOT],
            proposer=header[_B_PROPOSER].decode(),
            time=int.from_bytes(header[_B_TIME], "big"),
            txs=tuple(txs),
            votes=tuple(votes),
        )
    except KeyError as exc:
        raise InvariantViolation(f"block header missing field {exc}") from exc


# --- domains and config -------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    name: str
    parent: str | None = None  # None: directly under the co-governed root
    operators: frozenset[bytes] = frozenset()


@dataclass(frozen=True)
class RegistryConfig:
    committee: tuple[tuple[str, bytes], ...]  # (node name, node public key)
    domains: tuple[Domain, ...] = ()
    root_admins: frozenset[bytes] = frozenset()
    genesis_txs: tuple[Transaction, ...] = ()
    genesis_time: int = 0

    def __post_init__(self):
        names = [d.name for d in self.domains]
        if len(set(names)) != len(names):
            raise InvariantViolation("duplicate domain names")
        known = set(names)
        for d in self.domains:
            if d.parent is not None and d.parent not in known:
                raise InvariantViolation(f"domain {d.name} has unknown parent {d.parent}")

    def domain(self, name: str) -> Domain | None:
        for d in self.domains:
            if d.name == name:
                return d
        return None


# --- committed state ----------------------------------------------------------

@dataclass
class RegRecord:
    identifier: Identifier
    owner: bytes
    domain: str
    revoked: bool = False
    height: int = 0


class RegistryState:
    """Replay of all committed transactions, indexed for O(1) resolution."""

    def __init__(self):
        self.identifiers: dict[Identifier, RegRecord] = {}
        self.directory = Directory()
        self.graph = IdentifierGraph()
        self.visa_revocations: set[tuple[bytes, str]] = set()
        self.anchors: dict[str, tuple[int, bytes]] = {}

    def apply(self, tx: Transaction, height: int) -> None:
        k = tx.kind
        if k == TxKind.REGISTER_IDENTIFIER:
            self.identifiers[tx.identifier] = RegRecord(tx.identifier, tx.submitter, tx.domain, height=height)
            self.graph.add_node(tx.identifier)
        elif k == TxKind.REGISTER_IDENTITY:
            self.directory.register(
                IdentityRecord(
                    id_digest=tx.id_digest,
                    public_key=tx.public_key,
                    real_info_digest=tx.real_info_digest,
                    biometric_digest=tx.biometric_digest,
                    status=IdentityStatus.ACTIVE,
                    domain=tx.domain,
                )
            )
        elif k == TxKind.REVOKE:
            if tx.identifier is not None:
                self.identifiers[tx.identifier].revoked = True
            else:
                self.visa_revocations.add((tx.visa_subject, tx.domain))
        elif k == TxKind.BAN:
            self.directory.ban(tx.id_digest)
        elif k == TxKind.TRANSLATE_LINK:
            self.graph.add_edge(tx.link_a, tx.link_b)
        elif k == TxKind.AUDIT_ANCHOR:
            self.anchors[tx.router] = (tx.anchor_seq, tx.anchor_hash)

    def resolve(self, ident: Identifier) -> tuple[RegRecord, tuple[Identifier, ...]]:
        rec = self.identifiers.get(ident)
        if rec is None:
            raise NotFound(f"{ident} is not registered")
        links = tuple(sorted(self.graph.neighbors(ident), key=Identifier.sort_key))
        return rec, links


class _Overlay:
    """In-block effects during sequential validation of a candidate block."""

    def __init__(self):
        self.identifiers: set[Identifier] = set()
        self.identities: dict[bytes, Transaction] = {}
        self.banned: set[bytes] = set()
        self.banned_bios: set[bytes] = set()


def validate_tx(state: RegistryState, config: RegistryConfig, tx: Transaction,
                overlay: _Overlay | None = None) -> str | None:
    """None when valid against state (+overlay); else a short reason."""
    ov = overlay if overlay is not None else _Overlay()

    def identity_of(digest: bytes):
        rec = state.directory.get(digest)
        if rec is not None:
            return rec.public_key, rec.status, rec.domain
        pending = ov.identities.get(digest)
        if pending is not None:
            status = IdentityStatus.BANNED if digest in ov.banned else IdentityStatus.ACTIVE
            return pending.public_key, status, pending.domain
        return None

    # signature first: self-certifying for enrollment, registered key otherwise
    if tx.kind == TxKind.REGISTER_IDENTITY:
        if tx.id_digest is None or tx.public_key is None or tx.real_info_digest is None \
                or tx.biometric_digest is None or not tx.domain:
            return "MalformedBody"
        if tx.submitter != tx.id_digest:
            return "Unauthorized"
        if tx.id_digest != hashlib.sha256(tx.public_key).digest():
            return "BadSignature"
        if not verify_raw(tx.public_key, tx.signature, tx.body_bytes()):
            return "BadSignature"
        if identity_of(tx.id_digest) is not None:
            return "Duplicate"
        if state.directory.biometric_banned(tx.biometric_digest) or tx.biometric_digest in ov.banned_bios:
            return "DuplicateBiometric"
        if config.domain(tx.domain) is None:
            return "UnknownDomain"
        return None

    ident = identity_of(tx.submitter)
    if ident is None:
        return "UnknownSubmitter"
    pub, status, submitter_domain = ident
    if status is IdentityStatus.BANNED:
        return "Banned"
    if not verify_raw(pub, tx.signature, tx.body_bytes()):
        return "BadSignature"

    def authorized(domain_name: str) -> bool:
        if tx.submitter in config.root_admins:
            return True
        d = config.domain(domain_name)
        while d is not None:
            if tx.submitter in d.operators:
                return True
            d = config.domain(d.parent) if d.parent else None
        return submitter_domain == domain_name

    if tx.kind == TxKind.REGISTER_IDENTIFIER:
        if tx.identifier is None or not tx.domain:
            return "MalformedBody"
        if config.domain(tx.domain) is None:
            return "UnknownDomain"
        if not authorized(tx.domain):
            return "Unauthorized"
        if tx.identifier in state.identifiers or tx.identifier in ov.identifiers:
            return "Duplicate"
        return None

    if tx.kind == TxKind.BAN:
        if tx.id_digest is None:
            return "MalformedBody"
        target = identity_of(tx.id_digest)
        if target is None:
            return "UnknownIdentity"
        if not authorized(target[2]):
            return "Unauthorized"
        return None

    if tx.kind == TxKind.REVOKE:
        if tx.identifier is not None:
            rec = state.identifiers.get(tx.identifier)
            if rec is None and tx.identifier not in ov.identifiers:
                return "NotFound"
            domain_name = rec.domain if rec is not None else tx.domain
            if not authorized(domain_name):
                return "Unauthorized"
            return None
        if tx.visa_subject is None or not tx.domain:
            return "MalformedBody"
        if not authorized(tx.domain):
            return "Unauthorized"
        return None

    if tx.kind == TxKind.TRANSLATE_LINK:
        if tx.link_a is None or tx.link_b is None:
            return "MalformedBody"
        for endpoint in (tx.link_a, tx.link_b):
            rec = state.identifiers.get(endpoint)
            if rec is None and endpoint not in ov.identifiers:
                return "NotFound"
        recs = [state.identifiers.get(e) for e in (tx.link_a, tx.link_b)]
        owns = any(r is not None and r.owner == tx.submitter for r in recs)
        if not (owns or any(authorized(r.domain) for r in recs if r is not None)
                or tx.submitter in config.root_admins):
            return "Unauthorized"
        return None

    if tx.kind == TxKind.AUDIT_ANCHOR:
        if not tx.router or tx.anchor_hash is None or tx.anchor_seq is None:
            return "MalformedBody"
        return None

    return "UnknownKind"


def _overlay_add(ov: _Overlay, tx: Transaction) -> None:
    if tx.kind == TxKind.REGISTER_IDENTIFIER:
        ov.identifiers.add(tx.identifier)
    elif tx.kind == TxKind.REGISTER_IDENTITY:
        ov.identities[tx.id_digest] = tx
    elif tx.kind == TxKind.BAN:
        # committed records get their biometric tracked by Directory.ban on apply
        ov.banned.add(tx.id_digest)
        target = ov.identities.get(tx.id_digest)
        if target is not None:
            ov.banned_bios.add(target.biometric_digest)


# --- node -----------------------------------------------------------------------

class RegistryNode:
    """One committee member: pending pool, ledger replica, derived state."""

    def __init__(self, name: str, secret: bytes, config: RegistryConfig, genesis: LedgerBlock):
        self.name = name
        self._secret = secret
        self.config = config
        self.committee = dict(config.committee)
        self.ledger: list[LedgerBlock] = []
        self.state = RegistryState()
        self.pool: list[Transaction] = []
        self.tickets: dict[bytes, tuple[str, object]] = {}
        self.commit(genesis, check_quorum=False)

    # -- client API --

    def submit(self, tx: Transaction) -> bytes:
        """Queue a signed transaction; returns its ticket digest."""
        reason = validate_tx(self.state, self.config, tx)
        if reason == "BadSignature":
            raise BadSignature("transaction signature does not verify")
        if reason == "Unauthorized":
            raise Unauthorized("submitter lacks rights for the target domain")
        digest = tx.digest()
        if digest not in self.tickets or self.tickets[digest][0] == "pending":
            self.tickets[digest] = ("pending", None)
            if all(t.digest() != digest for t in self.pool):
                self.pool.append(tx)
        return digest

    def ticket_status(self, digest: bytes) -> tuple[str, object]:
        return self.tickets.get(digest, ("unknown", None))

    def resolve(self, ident: Identifier):
        return self.state.resolve(ident)

    @property
    def height(self) -> int:
        return len(self.ledger)

    def head_hash(self) -> bytes:
        return self.ledger[-1].chain_hash() if self.ledger else GENESIS_PREV

    # -- consensus steps --

    def propose(self, now: int) -> LedgerBlock | None:
        ov = _Overlay()
        chosen = []
        for tx in self.pool:
            if validate_tx(self.state, self.config, tx, ov) is None:
                chosen.append(tx)
                _overlay_add(ov, tx)
        if not chosen:
            self._prune_pool()
            return None
        return LedgerBlock(
            height=self.height,
            prev_hash=self.head_hash(),
            tx_root=tx_root_of(chosen),
            proposer=self.name,
            time=now,
            txs=tuple(chosen),
        )

    def evaluate(self, block: LedgerBlock) -> bool:
        """Honest vote decision: full revalidation against local state."""
        if block.height != self.height or block.prev_hash != self.head_hash():
            return False
        if block.proposer not in self.committee:
            return False
        if block.tx_root != tx_root_of(block.txs) or not block.txs:
            return False
        ov = _Overlay()
        for tx in block.txs:
            if validate_tx(self.state, self.config, tx, ov) is not None:
                return False
            _overlay_add(ov, tx)
        return True

    def vote(self, block: LedgerBlock) -> tuple[str, bytes]:
        return self.name, sign_raw(self._secret, _VOTE_CONTEXT + block.content_digest())

    def commit(self, block: LedgerBlock, check_quorum: bool = True) -> None:
        if check_quorum:
            ok = strict_vote_count(block, self.committee)
            if ok is None or 2 * ok <= len(self.committee):
                raise InvariantViolation("commit without strict vote majority")
            if block.height != self.height or block.prev_hash != self.head_hash():
                raise InvariantViolation("commit does not extend this replica")
        self.ledger.append(block)
        for tx in block.txs:
            self.state.apply(tx, block.height)
            self.tickets[tx.digest()] = ("committed", block.height)
        committed = {tx.digest() for tx in block.txs}
        self.pool = [t for t in self.pool if t.digest() not in committed]
        self._prune_pool()

    def _prune_pool(self) -> None:
        keep = []
        ov = _Overlay()
        for tx in self.pool:
            reason = validate_tx(self.state, self.config, tx, ov)
            if reason is None:
                keep.append(tx)
                _overlay_add(ov, tx)
            else:
                self.tickets[tx.digest()] = ("rejected", reason)
        self.pool = keep


def count_valid_votes(block: LedgerBlock, committee: dict[str, bytes]) -> int:
    msg = _VOTE_CONTEXT + block.content_digest()
    seen = set()
    for node, sig in block.votes:
        if node in committee and node not in seen and verify_raw(committee[node], sig, msg):
            seen.add(node)
    return len(seen)


def strict_vote_count(block: LedgerBlock, committee: dict[str, bytes]) -> int | None:
    """Vote count iff every carried vote is a distinct member's valid
    signature; None otherwise. Committed blocks never carry junk votes, so a
    single flipped octet anywhere in the vote region is detectable at its own
    height rather than one block later."""
    msg = _VOTE_CONTEXT + block.content_digest()
    seen = set()
    for node, sig in block.votes:
        if node not in committee or node in seen or not verify_raw(committee[node], sig, msg):
            return None
        seen.add(node)
    return len(seen)


def verify_chain(blocks, committee: dict[str, bytes]) -> int | None:
    """None when every hash, root, and vote checks out; else first bad height."""
    prev = GENESIS_PREV
    for h, block in enumerate(blocks):
        if block.height != h or block.prev_hash != prev:
            return h
        if block.tx_root != tx_root_of(block.txs):
            return h
        count = strict_vote_count(block, committee)
        if count is None or 2 * count <= len(committee):
            return h
        prev = block.chain_hash()
    return None


# --- genesis and the lock-step driver -------------------------------------------

def make_genesis(config: RegistryConfig, secrets: dict[str, bytes]) -> LedgerBlock:
    """Deterministic first block, voted by the whole committee."""
    block = LedgerBlock(
        height=0,
        prev_hash=GENESIS_PREV,
        tx_root=tx_root_of(config.genesis_txs),
        proposer=config.committee[0][0],
        time=config.genesis_time,
        txs=tuple(config.genesis_txs),
    )
    msg = _VOTE_CONTEXT + block.content_digest()
    votes = tuple((name, sign_raw(secrets[name], msg)) for name, _ in config.committee)
    return replace(block, votes=votes)


@dataclass
class FaultPlan:
    """Scripted faults for the driver: crashes take effect at a round number;
    arbitrary voters flip coins (vote yes / abstain / emit garbage);
    equivocators issue conflicting proposals, which voids their round."""

    crashed_from: dict[str, int] = field(default_factory=dict)
    arbitrary: dict[str, int] = field(default_factory=dict)  # node -> rng seed
    equivocators: frozenset[str] = frozenset()

    def is_crashed(self, node: str, rnd: int) -> bool:
        start = self.crashed_from.get(node)
        return start is not None and rnd >= start


class ConsensusNetwork:
    """Lock-step round driver over a set of replicas.

    One call to run_round performs at most one propose/vote/commit exchange;
    the proposer rotates every round regardless of outcome, so a crashed
    proposer costs exactly one round.
    """

    def __init__(self, n: int = 4, *, seed: int = 0, config_extra: dict | None = None,
                 faults: FaultPlan | None = None):
        rng = random.Random(seed)
        names = [f"reg{i}" for i in range(n)]
        secrets = {}
        pubs = []
        for name in names:
            from minnet.identity import generate_keypair

            sk, pk = generate_keypair(rng)
            secrets[name] = sk
            pubs.append((name, pk))
        extra = config_extra or {}
        self.config = RegistryConfig(committee=tuple(pubs), **extra)
        self.secrets = secrets
        genesis = make_genesis(self.config, secrets)
        self.nodes = [RegistryNode(name, secrets[name], self.config, genesis) for name in names]
        self.faults = faults or FaultPlan()
        self._arb_rngs = {node: random.Random(s) for node, s in self.faults.arbitrary.items()}
        self.round = 0
        self.clock = self.config.genesis_time

    @property
    def committee(self) -> dict[str, bytes]:
        return dict(self.config.committee)

    def node(self, name: str) -> RegistryNode:
        return next(n for n in self.nodes if n.name == name)

    def live_nodes(self):
        return [n for n in self.nodes if not self.faults.is_crashed(n.name, self.round)]

    def submit(self, tx: Transaction, via: int = 0) -> bytes:
        """Submit at one node and gossip to every live replica."""
        digest = self.nodes[via].submit(tx)
        for node in self.nodes:
            if node is not self.nodes[via] and not self.faults.is_crashed(node.name, self.round):
                node.submit(tx)
        return digest

    def run_round(self, now: int | None = None) -> LedgerBlock | None:
        rnd = self.round
        self.round += 1
        self.clock = now if now is not None else self.clock + 2
        proposer = self.nodes[rnd % len(self.nodes)]
        if self.faults.is_crashed(proposer.name, rnd):
            return None
        candidate = proposer.propose(self.clock)
        if candidate is None:
            for node in self.nodes:
                if not self.faults.is_crashed(node.name, rnd):
                    node._prune_pool()
            return None
        if proposer.name in self.faults.equivocators:
            # two distinct signed candidates observed for one round: voided
            conflicting = replace(candidate, time=candidate.time + 1)
            assert conflicting.content_digest() != candidate.content_digest()
            return None
        votes = []
        for node in self.nodes:
            if self.faults.is_crashed(node.name, rnd):
                continue
            if node.name in self._arb_rngs:
                roll = self._arb_rngs[node.name].randrange(3)
                if roll == 0:
                    votes.append(node.vote(candidate))
                elif roll == 1:
                    votes.append((node.name, b"\x00" * 64))  # garbage signature
                continue
            if node.evaluate(candidate):
                votes.append(node.vote(candidate))
        # only votes that actually verify go into the committed block
        msg = _VOTE_CONTEXT + candidate.content_digest()
        seen: set[str] = set()
        kept = []
        for name, sig in votes:
            if name in self.committee and name not in seen and verify_raw(self.committee[name], sig, msg):
                seen.add(name)
                kept.append((name, sig))
        block = replace(candidate, votes=tuple(kept))
        if 2 * len(kept) <= len(self.committee):
            return None
        for node in self.nodes:
            if not self.faults.is_crashed(node.name, rnd):
                node.commit(block)
        return block

    def run_rounds(self, k: int) -> list[LedgerBlock]:
        out = []
        for _ in range(k):
            b = self.run_round()
            if b is not None:
                out.append(b)
        return out


# --- persistence ------------------------------------------------------------------

def save_ledger(blocks, path) -> None:
    with open(path, "wb") as fh:
        for block in blocks:
            raw = block.canonical_bytes()
            fh.write(len(raw).to_bytes(4, "big") + raw)


def load_ledger(path) -> tuple[list[LedgerBlock], int | None]:
    """Blocks up to the first undecodable record; its height comes back too."""
    with open(path, "rb") as fh:
        blob = fh.read()
    blocks: list[LedgerBlock] = []
    off = 0
    while off < len(blob):
        idx = len(blocks)
        if off + 4 > len(blob):
            return blocks, idx
        n = int.from_bytes(blob[off : off + 4], "big")
        off += 4
        if off + n > len(blob):
            return blocks, idx
        try:
            block = decode_block(blob, off, off + n)
        except (CodecError, InvariantViolation, ValueError, KeyError):
            return blocks, idx
        # a record that does not re-encode to its own bytes was tampered with
        if block.canonical_bytes() != blob[off : off + n]:
            return blocks, idx
        blocks.append(block)
        off += n
    return blocks, None


def verify_ledger_file(path, committee: dict[str, bytes]) -> int | None:
    blocks, bad = load_ledger(path)
    chain_bad = verify_chain(blocks, committee)
    if chain_bad is not None:
        return chain_bad
    return bad


# --- wire messages -----------------------------------------------------------------

def encode_message(kind: int, payload: bytes) -> bytes:
    return element(kind, payload)


def encode_tx_submit(tx: Transaction) -> bytes:
    return encode_message(M_TX_SUBMIT, element(T_TX, tx.canonical_bytes()))


def encode_proposal(rnd: int, block: LedgerBlock) -> bytes:
    return encode_message(M_PROPOSAL, element(0x01, rnd.to_bytes(8, "big")) + block.canonical_bytes())


def encode_vote(rnd: int, node: str, sig: bytes) -> bytes:
    body = element(0x01, rnd.to_bytes(8, "big")) + element(0x02, node.encode()) + element(0x03, sig)
    return encode_message(M_VOTE, body)


def encode_commit(block: LedgerBlock) -> bytes:
    return encode_message(M_COMMIT, block.canonical_bytes())


def encode_query_req(ident: Identifier) -> bytes:
    return encode_message(M_QUERY_REQ, codec.encode_identifier(ident))


def encode_query_resp(found: bool, rec: RegRecord | None = None, links=()) -> bytes:
    if not found:
        return encode_message(M_QUERY_RESP, element(0x01, b"\x00"))
    body = element(0x01, b"\x01")
    body += element(0x02, rec.owner)
    body += element(0x03, rec.domain.encode())
    body += element(0x04, b"\x01" if rec.revoked else b"\x00")
    body += element(0x05, rec.height.to_bytes(8, "big"))
    body += element(_F_IDENTIFIER, codec.encode_identifier(rec.identifier))
    for link in links:
        body += element(_F_LINK_A, codec.encode_identifier(link))
    return encode_message(M_QUERY_RESP, body)


def decode_message(data: bytes) -> tuple[int, dict]:
    """Parse one node-to-node message into (kind, fields)."""
    buf = bytes(data)
    elems = _k.scan_elements(buf, 0, len(buf))
    if len(elems) != 1:
        raise InvariantViolation("expected one message element")
    kind, vs, ve = elems[0]
    if kind == M_TX_SUBMIT:
        inner = _k.scan_elements(buf, vs, ve)
        if len(inner) != 1 or inner[0][0] != T_TX:
            raise InvariantViolation("TxSubmit carries one transaction")
        return kind, {"tx": decode_transaction(buf, inner[0][1], inner[0][2])}
    if kind in (M_PROPOSAL, M_COMMIT):
        fields = {}
        rnd = None
        block = None
        for t, s, e in _k.scan_elements(buf, vs, ve):
            if t == 0x01:
                rnd = int.from_bytes(buf[s:e], "big")
            elif t == T_BLOCK:
                block = _decode_block_span(buf, s, e, t)
        if block is None:
            raise InvariantViolation("message missing block")
        fields["block"] = block
        if rnd is not None:
            fields["round"] = rnd
        return kind, fields
    if kind == M_VOTE:
        f = {t: buf[s:e] for t, s, e in _k.scan_elements(buf, vs, ve)}
        return kind, {
            "round": int.from_bytes(f[0x01], "big"),
            "node": f[0x02].decode(),
            "sig": f[0x03],
        }
    if kind == M_QUERY_REQ:
        return kind, {"identifier": _decode_nested_identifier(buf, vs, ve)}
    if kind == M_QUERY_RESP:
        f: dict = {}
        links = []
        for t, s, e in _k.scan_elements(buf, vs, ve):
            if t == _F_LINK_A:
                links.append(_decode_nested_identifier(buf, s, e))
            elif t == _F_IDENTIFIER:
                f["identifier"] = _decode_nested_identifier(buf, s, e)
            else:
                f[t] = buf[s:e]
        out = {"found": f.get(0x01) == b"\x01", "links": tuple(links)}
        if out["found"]:
            out.update(
                owner=f[0x02],
                domain=f[0x03].decode(),
                revoked=f[0x04] == b"\x01",
                height=int.from_bytes(f[0x05], "big"),
                identifier=f["identifier"],
            )
        return kind, out
    raise InvariantViolation(f"unknown message kind {kind:#04x}")


def _decode_block_span(buf: bytes, vs: int, ve: int, t: int) -> LedgerBlock:
    # decode_block expects to scan the outer element itself
    header = _k.encode_tl(t, ve - vs)
    chunk = header + buf[vs:ve]
    return decode_block(chunk, 0, len(chunk))
