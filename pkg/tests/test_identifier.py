"""Identifier namespace tests: prefix matching, candidate sorting, translation."""

from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import identifiers as identifier_strategy
from minnet.errors import InvariantViolation, NoTranslation, NoValidIdentifier
from minnet.identifier import (
    Identifier,
    IdentifierGraph,
    IdType,
    content_name,
    hyperbolic_id,
    identity_id,
    ip_id,
    is_prefix,
    parse_text,
    service_name,
    sort_candidates,
    translate,
)


def test_is_prefix_basic():
    assert is_prefix(content_name("/video"), content_name("/video/movie1"))
    assert not is_prefix(content_name("/video/movie1"), content_name("/video"))
    assert is_prefix(ip_id("10.0.0.1"), ip_id("10.0.0.1"))
    assert not is_prefix(ip_id("10.0.0.1"), ip_id("10.0.0.2"))
    assert not is_prefix(content_name("/video"), service_name("/video/movie1"))


@given(identifier_strategy, identifier_strategy, identifier_strategy)
@settings(max_examples=200, deadline=None)
def test_is_prefix_reflexive_transitive(a, b, c):
    assert is_prefix(a, a)
    if is_prefix(a, b) and is_prefix(b, c):
        assert is_prefix(a, c)


def test_sort_candidates_priority_and_filter():
    ip = ip_id("10.0.0.1")
    c = content_name("/a")
    assert sort_candidates([ip, c], lambda _: True) == [c, ip]
    assert sort_candidates([c, ip], lambda i: i.id_type == IdType.IP) == [ip]
    with pytest.raises(NoValidIdentifier):
        sort_candidates([c], lambda _: False)


def test_sort_candidates_tie_breaks():
    # shorter name first, then lexicographic components (derived by hand)
    ab = content_name("/a/b")
    a = content_name("/a")
    assert sort_candidates([ab, a], lambda _: True) == [a, ab]
    x = content_name("/a/a")
    assert sort_candidates([ab, x], lambda _: True) == [x, ab]


def test_sort_candidates_full_priority_order():
    ids = [
        hyperbolic_id("1", "2"),
        ip_id("1.2.3.4"),
        identity_id(b"\x01" * 32),
        service_name("/s"),
        content_name("/c"),
    ]
    got = [i.id_type for i in sort_candidates(ids, lambda _: True)]
    assert got == [IdType.CONTENT, IdType.SERVICE, IdType.IDENTITY, IdType.IP, IdType.HYPERBOLIC]


@given(st.lists(identifier_strategy, min_size=1, max_size=6), st.randoms(use_true_random=False))
@settings(max_examples=150, deadline=None)
def test_sort_candidates_deterministic_permutation(ids, rnd):
    base = sort_candidates(list(ids), lambda _: True)
    shuffled = list(ids)
    rnd.shuffle(shuffled)
    assert sort_candidates(shuffled, lambda _: True) == base
    assert sorted(map(repr, base)) == sorted(map(repr, ids))


def _bfs_oracle(adj, src, target_type):
    """Independent shortest-path enumeration: breadth-first level scan."""
    level = [src]
    seen = {src}
    while level:
        found = [n for n in level if n.id_type == target_type]
        if found:
            return sorted(found, key=Identifier.sort_key)
        nxt = []
        for n in level:
            for m in sorted(adj.get(n, ()), key=repr):
                if m not in seen:
                    seen.add(m)
                    nxt.append(m)
        level = nxt
    return []


def test_translate_one_hop_and_identity():
    g = IdentifierGraph()
    a = content_name("/a")
    ip = ip_id("10.0.0.1")
    g.add_edge(a, ip)
    assert translate(g, a, IdType.IP) == ip
    assert translate(g, a, IdType.CONTENT) == a
    with pytest.raises(NoTranslation):
        translate(g, a, IdType.SERVICE)
    with pytest.raises(NoTranslation):
        translate(g, content_name("/missing"), IdType.IP)


def test_translate_diamond_tie_break():
    # two equal-length paths to distinct ip nodes; expected winner derived
    # by enumerating all paths by hand: ip 10.0.0.1 < 10.0.0.2 in sort order
    g = IdentifierGraph()
    src = content_name("/src")
    mid1, mid2 = service_name("/m1"), service_name("/m2")
    ip1, ip2 = ip_id("10.0.0.1"), ip_id("10.0.0.2")
    g.add_edge(src, mid1)
    g.add_edge(src, mid2)
    g.add_edge(mid1, ip2)
    g.add_edge(mid2, ip1)
    assert translate(g, src, IdType.IP) == ip1


@given(st.data())
@settings(max_examples=100, deadline=None)
def test_translate_matches_bfs_oracle(data):
    rng = random.Random(data.draw(st.integers(0, 2**32)))
    nodes = [content_name(f"/n/{i}") for i in range(rng.randrange(2, 12))]
    nodes += [ip_id(f"10.0.0.{i}") for i in range(1, rng.randrange(2, 6))]
    g = IdentifierGraph()
    for n in nodes:
        g.add_node(n)
    adj = {}
    for _ in range(rng.randrange(1, 20)):
        a, b = rng.choice(nodes), rng.choice(nodes)
        g.add_edge(a, b)
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    src = rng.choice(nodes)
    if src not in adj:
        adj[src] = set()
    expected = _bfs_oracle(adj, src, IdType.IP)
    if not expected and src.id_type != IdType.IP:
        with pytest.raises(NoTranslation):
            translate(g, src, IdType.IP)
    else:
        got = translate(g, src, IdType.IP)
        if src.id_type == IdType.IP:
            assert got == src
        else:
            assert got == expected[0]
        # reachability: the result is always connected to src
        reach = {src}
        frontier = [src]
        while frontier:
            n = frontier.pop()
            for m in adj.get(n, ()):
                if m not in reach:
                    reach.add(m)
                    frontier.append(m)
        assert got in reach


def test_text_round_trip():
    cases = [
        "content:/a/b",
        "service:/printer/floor3",
        "identity:" + "ab" * 32,
        "ip:10.0.0.1",
        "ip:2001:db8::1",
        "hyp:1.5,-2.25",
        "hyp:0,0",
    ]
    for text in cases:
        ident = parse_text(text)
        assert parse_text(ident.to_text()) == ident
        assert ident.to_text() == text

    with pytest.raises(InvariantViolation):
        parse_text("bogus:/a")
    with pytest.raises(InvariantViolation):
        parse_text("identity:zz")
    with pytest.raises(InvariantViolation):
        parse_text("content:a")


def test_component_escaping():
    ident = Identifier(IdType.CONTENT, (b"a/b", b"\xff\x00x"))
    text = ident.to_text()
    assert parse_text(text) == ident


def test_identifier_invariants():
    with pytest.raises(InvariantViolation):
        Identifier(IdType.CONTENT, ())
    with pytest.raises(InvariantViolation):
        Identifier(IdType.CONTENT, tuple(bytes([i]) for i in range(40)))
    with pytest.raises(InvariantViolation):
        Identifier(IdType.IDENTITY, (b"\x00" * 31,))
    with pytest.raises(InvariantViolation):
        Identifier(IdType.IP, (b"\x00" * 5,))
    with pytest.raises(InvariantViolation):
        Identifier(IdType.HYPERBOLIC, (b"\x00" * 8,))
