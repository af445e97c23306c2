"""Minimal BER codec for SNMPv2c messages.

Covers exactly what the manager and the loopback agent exchange:
GetRequest, GetNextRequest, GetBulkRequest and Response PDUs carrying the
value kinds of :class:`cdpmap.mib.ValueKind`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from cdpmap.mib import Oid, SnmpValue, ValueKind, VarBind

SNMP_V2C = 1

TAG_INTEGER = 0x02
TAG_OCTET_STRING = 0x04
TAG_NULL = 0x05
TAG_OID = 0x06
TAG_SEQUENCE = 0x30
TAG_IP_ADDRESS = 0x40
TAG_COUNTER32 = 0x41
TAG_GAUGE32 = 0x42
TAG_TIME_TICKS = 0x43
TAG_NO_SUCH_OBJECT = 0x80
TAG_NO_SUCH_INSTANCE = 0x81
TAG_END_OF_MIB_VIEW = 0x82


class PduType(enum.IntEnum):
    GET = 0xA0
    GET_NEXT = 0xA1
    RESPONSE = 0xA2
    SET = 0xA3
    GET_BULK = 0xA5


class ErrorStatus(enum.IntEnum):
    NO_ERROR = 0
    TOO_BIG = 1
    GEN_ERR = 5


class BerError(ValueError):
    """Malformed or unsupported BER input."""


_KIND_TAGS = {
    ValueKind.INTEGER: TAG_INTEGER,
    ValueKind.OCTET_STRING: TAG_OCTET_STRING,
    ValueKind.OBJECT_IDENTIFIER: TAG_OID,
    ValueKind.IP_ADDRESS: TAG_IP_ADDRESS,
    ValueKind.COUNTER: TAG_COUNTER32,
    ValueKind.GAUGE: TAG_GAUGE32,
    ValueKind.TIME_TICKS: TAG_TIME_TICKS,
    ValueKind.END_OF_MIB_VIEW: TAG_END_OF_MIB_VIEW,
    ValueKind.NO_SUCH_OBJECT: TAG_NO_SUCH_OBJECT,
}
_UNSIGNED_TAGS = {
    TAG_COUNTER32: ValueKind.COUNTER,
    TAG_GAUGE32: ValueKind.GAUGE,
    TAG_TIME_TICKS: ValueKind.TIME_TICKS,
}


@dataclass
class Pdu:
    type: PduType
    request_id: int
    varbinds: list[VarBind] = field(default_factory=list)
    # error-status/error-index for most PDUs; non-repeaters/max-repetitions for GetBulk
    error_status: int = 0
    error_index: int = 0

    @property
    def non_repeaters(self) -> int:
        return self.error_status

    @property
    def max_repetitions(self) -> int:
        return self.error_index


@dataclass
class Message:
    community: bytes
    pdu: Pdu
    version: int = SNMP_V2C


def get_bulk(request_id: int, oids: list[Oid], max_repetitions: int, non_repeaters: int = 0) -> Pdu:
    return Pdu(PduType.GET_BULK, request_id, [VarBind(o, None) for o in oids],  # type: ignore[arg-type]
               non_repeaters, max_repetitions)


def request(pdu_type: PduType, request_id: int, oids: list[Oid]) -> Pdu:
    return Pdu(pdu_type, request_id, [VarBind(o, None) for o in oids])  # type: ignore[arg-type]


# -- encoding ---------------------------------------------------------------

def _length(n: int) -> bytes:
    if n < 0x80:
        return bytes([n])
    body = n.to_bytes((n.bit_length() + 7) // 8, "big")
    return bytes([0x80 | len(body)]) + body


def _tlv(tag: int, body: bytes) -> bytes:
    return bytes([tag]) + _length(len(body)) + body


def _signed(n: int) -> bytes:
    size = max(1, (n + (n < 0)).bit_length() // 8 + 1)
    return n.to_bytes(size, "big", signed=True)


def _unsigned(n: int) -> bytes:
    # leading zero octet when the high bit would read as a sign
    return n.to_bytes(n.bit_length() // 8 + 1, "big")


def _base128(n: int) -> bytes:
    out = [n & 0x7F]
    n >>= 7
    while n:
        out.append(0x80 | (n & 0x7F))
        n >>= 7
    return bytes(reversed(out))


def encode_oid(oid: Oid) -> bytes:
    arcs = oid.arcs
    body = _base128(arcs[0] * 40 + arcs[1]) + b"".join(_base128(a) for a in arcs[2:])
    return _tlv(TAG_OID, body)


def encode_value(value: SnmpValue | None) -> bytes:
    if value is None:
        return _tlv(TAG_NULL, b"")
    tag = _KIND_TAGS[value.kind]
    p = value.payload
    if value.is_exception:
        return _tlv(tag, b"")
    if value.kind is ValueKind.INTEGER:
        return _tlv(tag, _signed(p))  # type: ignore[arg-type]
    if tag in _UNSIGNED_TAGS:
        return _tlv(tag, _unsigned(p))  # type: ignore[arg-type]
    if value.kind is ValueKind.OBJECT_IDENTIFIER:
        return encode_oid(p)  # type: ignore[arg-type]
    return _tlv(tag, p)  # type: ignore[arg-type]


def encode_varbinds(varbinds: list[VarBind]) -> bytes:
    return _tlv(TAG_SEQUENCE, b"".join(
        _tlv(TAG_SEQUENCE, encode_oid(vb.oid) + encode_value(vb.value)) for vb in varbinds
    ))


def encode_message(msg: Message) -> bytes:
    pdu = msg.pdu
    pdu_body = (
        _tlv(TAG_INTEGER, _signed(pdu.request_id))
        + _tlv(TAG_INTEGER, _signed(pdu.error_status))
        + _tlv(TAG_INTEGER, _signed(pdu.error_index))
        + encode_varbinds(pdu.varbinds)
    )
    return _tlv(TAG_SEQUENCE,
                _tlv(TAG_INTEGER, _signed(msg.version))
                + _tlv(TAG_OCTET_STRING, msg.community)
                + _tlv(pdu.type, pdu_body))


# -- decoding ---------------------------------------------------------------

class _Reader:
    def __init__(self, data: bytes, pos: int = 0, end: int | None = None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def at_end(self) -> bool:
        return self.pos >= self.end

    def _byte(self) -> int:
        if self.pos >= self.end:
            raise BerError("truncated input")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def read_tlv(self) -> tuple[int, bytes, int]:
        """Return (tag, body, body_offset)."""
        tag = self._byte()
        first = self._byte()
        if first < 0x80:
            length = first
        else:
            n = first & 0x7F
            if n == 0 or n > 4:
                raise BerError(f"unsupported length form 0x{first:02x}")
            length = int.from_bytes(bytes(self._byte() for _ in range(n)), "big")
        start = self.pos
        if start + length > self.end:
            raise BerError("length exceeds available data")
        self.pos += length
        return tag, self.data[start:start + length], start

    def expect(self, tag: int) -> bytes:
        got, body, _ = self.read_tlv()
        if got != tag:
            raise BerError(f"expected tag 0x{tag:02x}, got 0x{got:02x}")
        return body

    def sub(self, tag: int) -> _Reader:
        got, body, start = self.read_tlv()
        if got != tag:
            raise BerError(f"expected tag 0x{tag:02x}, got 0x{got:02x}")
        return _Reader(self.data, start, start + len(body))

    def integer(self) -> int:
        body = self.expect(TAG_INTEGER)
        if not body:
            raise BerError("empty integer")
        return int.from_bytes(body, "big", signed=True)


def decode_oid_body(body: bytes) -> Oid:
    if not body or body[-1] & 0x80:
        raise BerError("truncated OID")
    subids, n = [], 0
    for b in body:
        n = (n << 7) | (b & 0x7F)
        if not b & 0x80:
            subids.append(n)
            n = 0
    first = subids[0]
    head = [min(first // 40, 2), first - 40 * min(first // 40, 2)]
    try:
        return Oid(tuple(head + subids[1:]))
    except ValueError as exc:
        raise BerError(str(exc)) from None


def decode_value(tag: int, body: bytes) -> SnmpValue | None:
    try:
        if tag == TAG_NULL:
            return None
        if tag == TAG_INTEGER:
            return SnmpValue(ValueKind.INTEGER, int.from_bytes(body, "big", signed=True))
        if tag == TAG_OCTET_STRING:
            return SnmpValue(ValueKind.OCTET_STRING, body)
        if tag == TAG_OID:
            return SnmpValue(ValueKind.OBJECT_IDENTIFIER, decode_oid_body(body))
        if tag == TAG_IP_ADDRESS:
            return SnmpValue(ValueKind.IP_ADDRESS, body)
        if tag in _UNSIGNED_TAGS:
            return SnmpValue(_UNSIGNED_TAGS[tag], int.from_bytes(body, "big"))
        if tag in (TAG_NO_SUCH_OBJECT, TAG_NO_SUCH_INSTANCE):
            return SnmpValue(ValueKind.NO_SUCH_OBJECT)
        if tag == TAG_END_OF_MIB_VIEW:
            return SnmpValue(ValueKind.END_OF_MIB_VIEW)
    except ValueError as exc:
        raise BerError(f"bad value for tag 0x{tag:02x}: {exc}") from None
    raise BerError(f"unsupported value tag 0x{tag:02x}")


def decode_message(data: bytes) -> Message:
    outer = _Reader(data)
    msg = outer.sub(TAG_SEQUENCE)
    version = msg.integer()
    community = msg.expect(TAG_OCTET_STRING)
    pdu_tag, pdu_body, start = msg.read_tlv()
    try:
        pdu_type = PduType(pdu_tag)
    except ValueError:
        raise BerError(f"unsupported PDU tag 0x{pdu_tag:02x}") from None
    r = _Reader(data, start, start + len(pdu_body))
    request_id = r.integer()
    status = r.integer()
    index = r.integer()
    vbl = r.sub(TAG_SEQUENCE)
    varbinds = []
    while not vbl.at_end():
        item = vbl.sub(TAG_SEQUENCE)
        oid = decode_oid_body(item.expect(TAG_OID))
        tag, body, _ = item.read_tlv()
        varbinds.append(VarBind(oid, decode_value(tag, body)))  # type: ignore[arg-type]
    return Message(community, Pdu(pdu_type, request_id, varbinds, status, index), version)
