"""Shared strategies and fixtures."""

from __future__ import annotations

import random

import pytest
from hypothesis import strategies as st

from minnet.codec import (
    ALG_ED25519,
    EXTENSION_FLOOR,
    MinPacket,
    PacketKind,
    ReadOnlyArea,
    SignatureBlock,
    TlvElement,
    VariableArea,
)
from minnet.identifier import Identifier, IdType

component = st.binary(min_size=1, max_size=16)

identifiers = st.one_of(
    st.builds(Identifier, st.just(IdType.CONTENT), st.lists(component, min_size=1, max_size=5).map(tuple)),
    st.builds(Identifier, st.just(IdType.SERVICE), st.lists(component, min_size=1, max_size=4).map(tuple)),
    st.builds(Identifier, st.just(IdType.IDENTITY), st.binary(min_size=32, max_size=32).map(lambda b: (b,))),
    st.builds(Identifier, st.just(IdType.IP), st.sampled_from([4, 16]).flatmap(
        lambda n: st.binary(min_size=n, max_size=n)).map(lambda b: (b,))),
    st.builds(Identifier, st.just(IdType.HYPERBOLIC), st.tuples(
        st.binary(min_size=8, max_size=8), st.binary(min_size=8, max_size=8))),
)

extension_elements = st.lists(
    st.builds(
        TlvElement,
        st.integers(min_value=EXTENSION_FLOOR, max_value=0xFF),
        st.binary(max_size=12),
    ),
    max_size=2,
).map(tuple)

signature_blocks = st.builds(
    SignatureBlock,
    st.just(ALG_ED25519),
    st.binary(min_size=32, max_size=32),
    st.binary(min_size=1, max_size=64),
    extension_elements,
)

readonly_areas = st.builds(
    ReadOnlyArea,
    st.integers(min_value=0, max_value=(1 << 64) - 1),
    st.binary(min_size=8, max_size=8),
    st.none() | st.binary(min_size=32, max_size=32),
    st.none(),
    extension_elements,
).flatmap(
    # a pass stamp is only legal alongside a visa
    lambda ro: st.just(ro)
    if ro.cyber_visa is None
    else st.builds(
        ReadOnlyArea,
        st.just(ro.timestamp),
        st.just(ro.nonce),
        st.just(ro.cyber_visa),
        st.none() | st.binary(min_size=32, max_size=32),
        st.just(ro.extensions),
    )
)

variable_areas = st.builds(
    VariableArea,
    st.binary(max_size=64),
    st.integers(min_value=0, max_value=255),
    extension_elements,
)


@st.composite
def packets(draw) -> MinPacket:
    kind = draw(st.sampled_from(list(PacketKind)))
    sig = draw(signature_blocks) if kind != PacketKind.INTEREST else draw(st.none() | signature_blocks)
    return MinPacket(
        kind=kind,
        identifiers=tuple(draw(st.lists(identifiers, min_size=1, max_size=3))),
        readonly=draw(readonly_areas),
        variable=draw(variable_areas),
        signature=sig,
        id_extensions=draw(extension_elements),
        extensions=draw(extension_elements),
    )


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)
