"""Hot-path byte kernels, pure-Python implementation.

The compiled variant in ``_core.pyx`` mirrors this module function for
function; ``minnet._kernels`` picks one of the two at import time. Keep the
surface tiny and the semantics identical in both.
"""

from __future__ import annotations

import hashlib

from minnet.errors import NonCanonicalEncoding, TruncatedInput

BACKEND = "pure"

_LEN1_MAX = 252


def read_tl(buf: bytes, off: int, end: int) -> tuple[int, int, int]:
    """Parse one type+length header inside buf[off:end].

    Returns (type_code, value_length, value_offset). Lengths below 253 use a
    single octet; markers 253/254/255 introduce a 2/4/8-octet big-endian
    length that must be in minimal form.
    """
    if off + 2 > end:
        raise TruncatedInput("element header past end of container")
    t = buf[off]
    first = buf[off + 1]
    off += 2
    if first <= _LEN1_MAX:
        return t, first, off
    width = 2 << (first - 253)
    if off + width > end:
        raise TruncatedInput("extended length field truncated")
    n = int.from_bytes(buf[off : off + width], "big")
    if width == 2:
        minimum = _LEN1_MAX + 1
    elif width == 4:
        minimum = 1 << 16
    else:
        minimum = 1 << 32
    if n < minimum:
        raise NonCanonicalEncoding("length not minimally encoded")
    return t, n, off + width


def scan_elements(buf: bytes, start: int, end: int) -> list[tuple[int, int, int]]:
    """Tile buf[start:end] into elements; returns [(type, value_start, value_end)].

    Raises if any element overruns the container; an exact tiling is the only
    accepted layout.
    """
    out = []
    off = start
    while off < end:
        t, n, voff = read_tl(buf, off, end)
        vend = voff + n
        if vend > end:
            raise TruncatedInput("element value overruns container")
        out.append((t, voff, vend))
        off = vend
    return out


def encode_tl(t: int, length: int) -> bytes:
    """Minimal type+length header for a value of the given length."""
    if length <= _LEN1_MAX:
        return bytes((t, length))
    if length < 1 << 16:
        return bytes((t, 253)) + length.to_bytes(2, "big")
    if length < 1 << 32:
        return bytes((t, 254)) + length.to_bytes(4, "big")
    return bytes((t, 255)) + length.to_bytes(8, "big")


def xor32(a: bytes, b: bytes) -> bytes:
    """XOR of two 32-octet strings."""
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).to_bytes(32, "little")


def visa_digest(masked_time: int, cvk: bytes) -> bytes:
    """SHA-256 of (time replicated into four little-endian 64-bit lanes) XOR cvk."""
    return hashlib.sha256(xor32(masked_time.to_bytes(8, "little") * 4, cvk)).digest()


def pass_digest(cpk: bytes, visa: bytes) -> bytes:
    """SHA-256 of cpk XOR visa."""
    return hashlib.sha256(xor32(cpk, visa)).digest()
