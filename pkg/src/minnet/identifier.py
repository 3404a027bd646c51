"""The multi-identifier namespace.

Five identifier types coexist on the wire: identity digests, hierarchical
content and service names, IP addresses, and hyperbolic coordinates. Routers
pick among a packet's identifiers with a fixed, deterministic policy
(`sort_candidates`), and the registry's translation graph maps one identifier
onto another (`translate`).
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from enum import IntEnum
from urllib.parse import quote, unquote_to_bytes

from minnet.errors import InvariantViolation, NoTranslation, NoValidIdentifier


class IdType(IntEnum):
    IDENTITY = 1
    CONTENT = 2
    SERVICE = 3
    IP = 4
    HYPERBOLIC = 5


# Router preference order when several identifiers could route one packet.
TYPE_PRIORITY = {
    IdType.CONTENT: 0,
    IdType.SERVICE: 1,
    IdType.IDENTITY: 2,
    IdType.IP: 3,
    IdType.HYPERBOLIC: 4,
}

_MAX_NAME_COMPONENTS = 32
_FIXED_POINT_SCALE = 1 << 32
_I64_MIN, _I64_MAX = -(1 << 63), (1 << 63) - 1

_TEXT_PREFIXES = {
    "identity": IdType.IDENTITY,
    "content": IdType.CONTENT,
    "service": IdType.SERVICE,
    "ip": IdType.IP,
    "hyp": IdType.HYPERBOLIC,
}
_PREFIX_BY_TYPE = {v: k for k, v in _TEXT_PREFIXES.items()}


@dataclass(frozen=True)
class Identifier:
    """One typed name. Component layout depends on id_type:

    identity    one 32-octet digest
    content     1-32 name components, each 1-255 octets
    service     same as content
    ip          one 4- or 16-octet address
    hyperbolic  two 8-octet big-endian signed fixed-point coords (2^-32 scale)
    """

    id_type: IdType
    components: tuple[bytes, ...]

    def __post_init__(self):
        comps = tuple(bytes(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        t = self.id_type
        if t in (IdType.CONTENT, IdType.SERVICE):
            if not 1 <= len(comps) <= _MAX_NAME_COMPONENTS:
                raise InvariantViolation(f"{t.name} name needs 1-{_MAX_NAME_COMPONENTS} components")
            for c in comps:
                if not 1 <= len(c) <= 255:
                    raise InvariantViolation("name component must be 1-255 octets")
        elif t == IdType.IDENTITY:
            if len(comps) != 1 or len(comps[0]) != 32:
                raise InvariantViolation("identity identifier is one 32-octet digest")
        elif t == IdType.IP:
            if len(comps) != 1 or len(comps[0]) not in (4, 16):
                raise InvariantViolation("ip identifier is one 4- or 16-octet address")
        elif t == IdType.HYPERBOLIC:
            if len(comps) != 2 or any(len(c) != 8 for c in comps):
                raise InvariantViolation("hyperbolic identifier is two 8-octet coordinates")
        else:
            raise InvariantViolation(f"unknown identifier type {t!r}")

    def sort_key(self) -> tuple:
        """Total order used by sort_candidates and every tie-break."""
        return (TYPE_PRIORITY[self.id_type], len(self.components), self.components, int(self.id_type))

    def to_text(self) -> str:
        t = self.id_type
        if t in (IdType.CONTENT, IdType.SERVICE):
            path = "/".join(quote(c, safe="") for c in self.components)
            return f"{_PREFIX_BY_TYPE[t]}:/{path}"
        if t == IdType.IDENTITY:
            return f"identity:{self.components[0].hex()}"
        if t == IdType.IP:
            return f"ip:{ipaddress.ip_address(self.components[0])}"
        x, y = (_fixed_to_decimal(c) for c in self.components)
        return f"hyp:{x},{y}"

    def __str__(self) -> str:
        return self.to_text()


def content_name(path: str) -> Identifier:
    return _name_from_path(IdType.CONTENT, path)

def service_name(path: str) -> Identifier:
    return _name_from_path(IdType.SERVICE, path)

def identity_id(digest: bytes) -> Identifier:
    return Identifier(IdType.IDENTITY, (bytes(digest),))

def ip_id(text: str) -> Identifier:
    return Identifier(IdType.IP, (ipaddress.ip_address(text).packed,))

def hyperbolic_id(x: str | float, y: str | float) -> Identifier:
    return Identifier(IdType.HYPERBOLIC, (_decimal_to_fixed(x), _decimal_to_fixed(y)))


def _name_from_path(t: IdType, path: str) -> Identifier:
    if not path.startswith("/"):
        raise InvariantViolation("hierarchical names start with '/'")
    parts = path.split("/")[1:]
    if parts == [""]:
        raise InvariantViolation("empty name")
    return Identifier(t, tuple(unquote_to_bytes(p) for p in parts))


def _decimal_to_fixed(v) -> bytes:
    scaled = (Decimal(str(v)) * _FIXED_POINT_SCALE).to_integral_value(ROUND_HALF_EVEN)
    n = int(scaled)
    if not _I64_MIN <= n <= _I64_MAX:
        raise InvariantViolation("hyperbolic coordinate out of range")
    return n.to_bytes(8, "big", signed=True)


def _fixed_to_decimal(raw: bytes) -> str:
    n = int.from_bytes(raw, "big", signed=True)
    d = Decimal(n) / _FIXED_POINT_SCALE
    s = format(d, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s or "0"


def parse_text(text: str) -> Identifier:
    """Parse the CLI/config syntax: content:/a/b, service:/x, identity:<hex>,
    ip:10.0.0.1, hyp:<x>,<y>."""
    prefix, sep, rest = text.partition(":")
    if not sep or prefix not in _TEXT_PREFIXES:
        raise InvariantViolation(f"unrecognized identifier syntax: {text!r}")
    t = _TEXT_PREFIXES[prefix]
    if t in (IdType.CONTENT, IdType.SERVICE):
        return _name_from_path(t, rest)
    if t == IdType.IDENTITY:
        try:
            digest = bytes.fromhex(rest)
        except ValueError as exc:
            raise InvariantViolation("identity identifier wants 64 hex chars") from exc
        return identity_id(digest)
    if t == IdType.IP:
        try:
            return ip_id(rest)
        except ValueError as exc:
            raise InvariantViolation(f"bad ip identifier: {rest!r}") from exc
    x, sep, y = rest.partition(",")
    if not sep:
        raise InvariantViolation("hyperbolic identifier wants '<x>,<y>'")
    try:
        return hyperbolic_id(x, y)
    except (ArithmeticError, ValueError) as exc:
        raise InvariantViolation(f"bad hyperbolic coordinates: {rest!r}") from exc


def is_prefix(a: Identifier, b: Identifier) -> bool:
    """True iff a's components lead b's (same type); non-hierarchical types
    match on equality only."""
    if a.id_type != b.id_type:
        return False
    if a.id_type in (IdType.CONTENT, IdType.SERVICE):
        return a.components == b.components[: len(a.components)]
    return a.components == b.components


def sort_candidates(ids, reachable) -> list[Identifier]:
    """Filter to reachable identifiers and order them by the fixed policy:
    content > service > identity > ip > hyperbolic, shorter names first,
    then lexicographic components. Deterministic under input shuffling."""
    kept = [i for i in ids if reachable(i)]
    if not kept:
        raise NoValidIdentifier("no reachable identifier among candidates")
    kept.sort(key=Identifier.sort_key)
    return kept


@dataclass
class IdentifierGraph:
    """Undirected translation graph between identifiers."""

    _adj: dict[Identifier, set[Identifier]] = field(default_factory=dict)

    @property
    def nodes(self) -> set[Identifier]:
        return set(self._adj)

    def add_node(self, ident: Identifier) -> None:
        self._adj.setdefault(ident, set())

    def add_edge(self, a: Identifier, b: Identifier) -> None:
        self.add_node(a)
        self.add_node(b)
        self._adj[a].add(b)
        self._adj[b].add(a)

    def neighbors(self, ident: Identifier) -> set[Identifier]:
        return self._adj.get(ident, set())

    def translate(self, src: Identifier, target_type: IdType) -> Identifier:
        """Nearest node of target_type reachable from src; distance ties are
        broken by the candidate sort order of the final node."""
        if src not in self._adj:
            raise NoTranslation(f"{src} is not in the graph")
        if src.id_type == target_type:
            return src
        frontier = [src]
        seen = {src}
        while frontier:
            nxt = []
            hits = [n for n in frontier if n.id_type == target_type]
            if hits:
                return min(hits, key=Identifier.sort_key)
            for n in frontier:
                for m in self._adj[n]:
                    if m not in seen:
                        seen.add(m)
                        nxt.append(m)
            frontier = nxt
        raise NoTranslation(f"no {target_type.name} identifier reachable from {src}")


def translate(g: IdentifierGraph, src: Identifier, target_type: IdType) -> Identifier:
    return g.translate(src, target_type)
