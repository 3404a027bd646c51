"""Multi-identifier network toolkit.

A TLV packet codec, a name-based forwarding engine (FIB/PIT/CS), a border
customs protocol with time-windowed visa/pass stamps, a vote-committed
identifier registry on a hash-chained ledger, and a deterministic
discrete-event simulator that wires them together.
"""

__version__ = "0.1.0"

from minnet import errors
from minnet.codec import MinPacket, PacketKind, decode_packet, encode_packet, packet_digest
from minnet.identifier import Identifier, IdType, parse_text

__all__ = [
    "errors",
    "MinPacket",
    "PacketKind",
    "decode_packet",
    "encode_packet",
    "packet_digest",
    "Identifier",
    "IdType",
    "parse_text",
    "__version__",
]
