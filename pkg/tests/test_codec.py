"""Codec tests.

Expected wire vectors are assembled by hand from the grammar table
(type, minimal length, value), independent of the encoder under test.
"""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minnet import codec
from minnet.codec import (
    MinPacket,
    PacketKind,
    ReadOnlyArea,
    SignatureBlock,
    TlvElement,
    VariableArea,
    decode_packet,
    encode_packet,
)
from minnet.errors import (
    CodecError,
    InvariantViolation,
    LengthMismatch,
    NonCanonicalEncoding,
    TruncatedInput,
    UnknownAlgorithm,
    UnknownCriticalType,
)
from minnet.identifier import Identifier, IdType, content_name

from conftest import packets


def _interest_a() -> MinPacket:
    return MinPacket(
        PacketKind.INTEREST,
        (content_name("/a"),),
        ReadOnlyArea(timestamp=0, nonce=b"\x00" * 8),
        VariableArea(payload=b"", hop_limit=0x40),
    )


def test_minimal_interest_vector_hand_built():
    # oracle: every byte written out from the grammar table by hand
    expected = bytes.fromhex(
        "05" "27"              # Interest, body length 39
        "10" "08"              # identifier area, 8 octets
        "20" "06"              # one identifier element
        "21" "01" "02"         # id-type = content
        "22" "01" "61"         # component "a"
        "12" "14"              # read-only area, 20 octets
        "40" "08" "0000000000000000"  # timestamp 0
        "43" "08" "0000000000000000"  # nonce, 8 zero octets
        "13" "05"              # variable area, 5 octets
        "50" "00"              # empty payload
        "51" "01" "40"         # hop limit 64
    )
    got = encode_packet(_interest_a())
    assert got[0] == 0x05
    assert got == expected
    assert decode_packet(expected) == _interest_a()


def test_interest_with_zero_identifiers_rejected():
    with pytest.raises(InvariantViolation):
        MinPacket(PacketKind.INTEREST, (), ReadOnlyArea(0, b"\x00" * 8), VariableArea())


def test_data_requires_signature_on_the_wire():
    unsigned = MinPacket(
        PacketKind.DATA, (content_name("/a"),), ReadOnlyArea(0, b"\x00" * 8), VariableArea()
    )
    with pytest.raises(InvariantViolation):
        encode_packet(unsigned)


def test_pass_requires_visa():
    with pytest.raises(InvariantViolation):
        ReadOnlyArea(0, b"\x00" * 8, cyber_visa=None, cyber_pass=b"\x01" * 32)


def test_empty_input_is_truncated():
    with pytest.raises(TruncatedInput):
        decode_packet(b"")


def test_trailing_garbage_is_length_mismatch():
    good = encode_packet(_interest_a())
    with pytest.raises(LengthMismatch):
        decode_packet(good + b"\x00")


def test_unknown_packet_kind():
    body = encode_packet(_interest_a())[2:]
    with pytest.raises(UnknownCriticalType):
        decode_packet(bytes((0x09, len(body))) + body)


def test_unknown_critical_type_inside_area():
    # replace the payload element (0x50) with an unassigned critical code
    good = bytearray(encode_packet(_interest_a()))
    idx = good.index(0x50, 30)
    good[idx] = 0x5F
    with pytest.raises(UnknownCriticalType):
        decode_packet(bytes(good))


def test_non_minimal_length_rejected():
    # same minimal Interest but the identifier area length written as FD 00 08
    inner = bytes.fromhex("2006" "210102" "220161")
    id_area = bytes.fromhex("10FD0008") + inner
    ro = bytes.fromhex("1214" "4008" + "00" * 8 + "4308" + "00" * 8)
    var = bytes.fromhex("1305" "5000" "510140")
    body = id_area + ro + var
    pkt = bytes((0x05, len(body))) + body
    with pytest.raises(NonCanonicalEncoding):
        decode_packet(pkt)


def test_areas_out_of_order_rejected():
    p = _interest_a()
    id_area = codec._encode_id_area(p)
    ro = codec._encode_ro_area(p.readonly)
    var = codec._encode_var_area(p.variable)
    body = id_area + var + ro  # variable before read-only
    with pytest.raises(NonCanonicalEncoding):
        decode_packet(bytes((0x05, len(body))) + body)


def test_duplicate_area_rejected():
    p = _interest_a()
    id_area = codec._encode_id_area(p)
    ro = codec._encode_ro_area(p.readonly)
    var = codec._encode_var_area(p.variable)
    body = id_area + ro + ro + var
    with pytest.raises(NonCanonicalEncoding):
        decode_packet(bytes((0x05, len(body))) + body)


def test_unknown_signature_algorithm():
    sig_area = (
        codec.element(codec.T_SIG_ALG, b"\x02")
        + codec.element(codec.T_SIGNER_ID, b"\x00" * 32)
        + codec.element(codec.T_SIGNATURE, b"\x55" * 64)
    )
    p = _interest_a()
    body = (
        codec._encode_id_area(p)
        + codec.element(codec.T_SIG_AREA, sig_area)
        + codec._encode_ro_area(p.readonly)
        + codec._encode_var_area(p.variable)
    )
    with pytest.raises(UnknownAlgorithm):
        decode_packet(bytes((0x05, len(body))) + body)


def test_wrong_fixed_field_size():
    # nonce of 7 octets
    ro = codec.element(codec.T_TIMESTAMP, b"\x00" * 8) + codec.element(codec.T_NONCE, b"\x00" * 7)
    p = _interest_a()
    body = (
        codec._encode_id_area(p)
        + codec.element(codec.T_RO_AREA, ro)
        + codec._encode_var_area(p.variable)
    )
    with pytest.raises(LengthMismatch):
        decode_packet(bytes((0x05, len(body))) + body)


def test_extension_elements_survive_round_trip():
    p = MinPacket(
        PacketKind.INTEREST,
        (content_name("/a"),),
        ReadOnlyArea(5, b"\x07" * 8, extensions=(TlvElement(0x90, b"\x01\x02"),)),
        VariableArea(b"hi", 9, extensions=(TlvElement(0x81, b""),)),
        id_extensions=(TlvElement(0xFF, b"z"),),
        extensions=(TlvElement(0x80, b"tail"), TlvElement(0x80, b"tail2")),
    )
    wire = encode_packet(p)
    again = decode_packet(wire)
    assert again == p
    assert encode_packet(again) == wire


def test_extension_before_known_field_rejected():
    # an 0x90 element ahead of the nonce violates canonical element order
    ro = (
        codec.element(codec.T_TIMESTAMP, b"\x00" * 8)
        + codec.element(0x90, b"")
        + codec.element(codec.T_NONCE, b"\x00" * 8)
    )
    p = _interest_a()
    body = (
        codec._encode_id_area(p)
        + codec.element(codec.T_RO_AREA, ro)
        + codec._encode_var_area(p.variable)
    )
    with pytest.raises(NonCanonicalEncoding):
        decode_packet(bytes((0x05, len(body))) + body)


@given(packets())
@settings(max_examples=300, deadline=None)
def test_round_trip_property(pkt):
    wire = encode_packet(pkt)
    decoded = decode_packet(wire)
    assert decoded == pkt
    assert encode_packet(decoded) == wire


@given(st.binary(max_size=200))
@settings(max_examples=500, deadline=None)
def test_decode_total_on_random_bytes(blob):
    try:
        pkt = decode_packet(blob)
    except CodecError:
        return
    assert encode_packet(pkt) == bytes(blob)


@given(packets(), st.data())
@settings(max_examples=200, deadline=None)
def test_decode_total_on_mutated_valid_packets(pkt, data):
    wire = bytearray(encode_packet(pkt))
    flips = data.draw(st.lists(st.integers(0, len(wire) - 1), min_size=1, max_size=4))
    for i in flips:
        wire[i] ^= data.draw(st.integers(1, 255))
    try:
        decoded = decode_packet(bytes(wire))
    except CodecError:
        return
    assert encode_packet(decoded) == bytes(wire)


def test_signed_bytes_stable_under_in_flight_mutation():
    from dataclasses import replace

    p = MinPacket(
        PacketKind.DATA,
        (content_name("/a/b"),),
        ReadOnlyArea(100, b"\x01" * 8),
        VariableArea(b"payload", 64),
        SignatureBlock(codec.ALG_ED25519, b"\x02" * 32, b"\x03" * 64),
    )
    base = codec.signed_bytes(p)
    stamped = replace(
        p,
        readonly=replace(p.readonly, timestamp=999, cyber_visa=b"\x04" * 32, cyber_pass=b"\x05" * 32),
        variable=replace(p.variable, hop_limit=7),
    )
    assert codec.signed_bytes(stamped) == base
    assert codec.packet_digest(stamped) == codec.packet_digest(p)
    # but payload and name mutations change it
    assert codec.signed_bytes(replace(p, variable=replace(p.variable, payload=b"Payload"))) != base
    assert codec.signed_bytes(replace(p, identifiers=(content_name("/a/c"),))) != base


def test_large_payload_uses_extended_length():
    p = MinPacket(
        PacketKind.GPPKT,
        (content_name("/big"),),
        ReadOnlyArea(0, b"\x00" * 8),
        VariableArea(b"\xAA" * 300, 3),
        SignatureBlock(codec.ALG_ED25519, b"\x09" * 32, b"\x08" * 64),
    )
    wire = encode_packet(p)
    assert decode_packet(wire) == p
    # 300-octet value must use the FD marker with big-endian 0x012C
    assert bytes((codec.T_PAYLOAD, 253, 0x01, 0x2C)) in wire


def test_fuzz_corpus_never_crashes(rng: random.Random):
    corpus = [encode_packet(_interest_a())]
    for _ in range(2000):
        blob = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 80)))
        try:
            decode_packet(blob)
        except CodecError:
            pass
        base = bytearray(corpus[0])
        for _ in range(rng.randrange(1, 4)):
            base[rng.randrange(len(base))] = rng.randrange(256)
        try:
            decode_packet(bytes(base))
        except CodecError:
            pass
