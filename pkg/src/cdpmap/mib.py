"""OIDs, SNMP values and the CISCO-CDP-MIB cache table codec.

Everything here is an immutable value; the functions are pure.
"""

from __future__ import annotations

import enum
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from ipaddress import IPv4Address
from typing import Union


class OidParseError(ValueError):
    def __init__(self, text: str, position: int, reason: str):
        self.text = text
        self.position = position
        super().__init__(f"malformed OID {text!r} at arc {position}: {reason}")


class OrderingError(ValueError):
    """Varbinds were expected in strictly increasing OID order."""


class CdpDecodeError(ValueError):
    def __init__(self, index: tuple[int, int], reason: str):
        self.index = index
        super().__init__(f"cdpCacheTable row {index[0]}.{index[1]}: {reason}")


@dataclass(frozen=True, order=True)
class Oid:
    """Object identifier.

    Ordering is the tuple ordering of the arcs, which is exactly the SNMP
    lexicographic order (a prefix sorts before its extensions).
    """

    arcs: tuple[int, ...]

    def __post_init__(self) -> None:
        arcs = tuple(self.arcs)
        object.__setattr__(self, "arcs", arcs)
        if len(arcs) < 2:
            raise ValueError(f"OID needs at least 2 arcs, got {arcs}")
        if any(not isinstance(a, int) or a < 0 for a in arcs):
            raise ValueError(f"OID arcs must be non-negative integers, got {arcs}")
        if arcs[0] > 2:
            raise ValueError(f"first OID arc must be 0, 1 or 2, got {arcs[0]}")
        if arcs[0] < 2 and arcs[1] > 39:
            raise ValueError(f"second OID arc must be <= 39 under {arcs[0]}, got {arcs[1]}")

    def __str__(self) -> str:
        return ".".join(map(str, self.arcs))

    def __repr__(self) -> str:
        return f"Oid({self})"

    def __add__(self, suffix: Iterable[int]) -> Oid:
        return Oid(self.arcs + tuple(suffix))

    def __len__(self) -> int:
        return len(self.arcs)

    def is_prefix_of(self, other: Oid) -> bool:
        """True if ``other`` lies strictly inside this subtree."""
        n = len(self.arcs)
        return len(other.arcs) > n and other.arcs[:n] == self.arcs

    def suffix(self, prefix: Oid) -> tuple[int, ...]:
        if not prefix.is_prefix_of(self):
            raise ValueError(f"{prefix} is not a proper prefix of {self}")
        return self.arcs[len(prefix.arcs):]


def parse_oid(text: str) -> Oid:
    if not text:
        raise OidParseError(text, 1, "empty text")
    parts = text.split(".")
    arcs = []
    for pos, part in enumerate(parts, start=1):
        if part == "":
            raise OidParseError(text, pos, "empty arc")
        if not part.isascii() or not part.isdigit():
            raise OidParseError(text, pos, f"non-digit arc {part!r}")
        arcs.append(int(part))
    try:
        return Oid(tuple(arcs))
    except ValueError as exc:
        raise OidParseError(text, len(arcs), str(exc)) from None


def compare_oids(a: Oid, b: Oid) -> int:
    """Three-way comparison: -1, 0 or 1."""
    return (a.arcs > b.arcs) - (a.arcs < b.arcs)


class ValueKind(enum.Enum):
    INTEGER = "integer"
    OCTET_STRING = "octet-string"
    OBJECT_IDENTIFIER = "object-identifier"
    IP_ADDRESS = "ip-address"
    COUNTER = "counter"
    GAUGE = "gauge"
    TIME_TICKS = "time-ticks"
    END_OF_MIB_VIEW = "end-of-mib-view"
    NO_SUCH_OBJECT = "no-such-object"


_UNSIGNED = (ValueKind.COUNTER, ValueKind.GAUGE, ValueKind.TIME_TICKS)
_EMPTY = (ValueKind.END_OF_MIB_VIEW, ValueKind.NO_SUCH_OBJECT)

Payload = Union[int, bytes, Oid, None]


@dataclass(frozen=True)
class SnmpValue:
    kind: ValueKind
    payload: Payload = None

    def __post_init__(self) -> None:
        k, p = self.kind, self.payload
        if k in _EMPTY:
            if p is not None:
                raise ValueError(f"{k.value} carries no payload")
        elif k is ValueKind.INTEGER:
            if not isinstance(p, int) or not -(2**31) <= p < 2**31:
                raise ValueError(f"integer payload out of range: {p!r}")
        elif k in _UNSIGNED:
            if not isinstance(p, int) or not 0 <= p < 2**32:
                raise ValueError(f"{k.value} payload out of range: {p!r}")
        elif k is ValueKind.OBJECT_IDENTIFIER:
            if not isinstance(p, Oid):
                raise ValueError(f"object-identifier payload must be an Oid: {p!r}")
        elif k is ValueKind.IP_ADDRESS:
            if not isinstance(p, bytes) or len(p) != 4:
                raise ValueError(f"ip-address payload must be 4 octets: {p!r}")
        elif not isinstance(p, bytes):
            raise ValueError(f"octet-string payload must be bytes: {p!r}")

    @classmethod
    def integer(cls, n: int) -> SnmpValue:
        return cls(ValueKind.INTEGER, n)

    @classmethod
    def octets(cls, data: bytes | str) -> SnmpValue:
        if isinstance(data, str):
            data = data.encode()
        return cls(ValueKind.OCTET_STRING, data)

    @classmethod
    def ip(cls, address: str | IPv4Address) -> SnmpValue:
        return cls(ValueKind.IP_ADDRESS, IPv4Address(address).packed)

    @classmethod
    def oid(cls, oid: Oid) -> SnmpValue:
        return cls(ValueKind.OBJECT_IDENTIFIER, oid)

    @property
    def is_exception(self) -> bool:
        return self.kind in _EMPTY

    def as_text(self) -> str:
        if not isinstance(self.payload, bytes):
            raise TypeError(f"{self.kind.value} value has no text form")
        return self.payload.decode("utf-8", errors="replace")


END_OF_MIB_VIEW = SnmpValue(ValueKind.END_OF_MIB_VIEW)
NO_SUCH_OBJECT = SnmpValue(ValueKind.NO_SUCH_OBJECT)


@dataclass(frozen=True)
class VarBind:
    oid: Oid
    value: SnmpValue


# CISCO-CDP-MIB::cdpCacheEntry and the columns the crawl reads.
CDP_CACHE_ENTRY = parse_oid("1.3.6.1.4.1.9.9.23.1.2.1.1")
CDP_CACHE_TABLE = parse_oid("1.3.6.1.4.1.9.9.23.1.2.1")
COL_ADDRESS_TYPE = 3
COL_ADDRESS = 4
COL_DEVICE_ID = 6
COL_DEVICE_PORT = 7
CDP_ADDRESS_TYPE_IP = 1

SYS_NAME = parse_oid("1.3.6.1.2.1.1.5")
SYS_NAME_0 = SYS_NAME + (0,)
IF_DESCR = parse_oid("1.3.6.1.2.1.2.2.1.2")
IF_ADMIN_STATUS = parse_oid("1.3.6.1.2.1.2.2.1.7")
DOT1D_BASE_PORT_IFINDEX = parse_oid("1.3.6.1.2.1.17.1.4.1.2")
DOT1D_STP_PORT_STATE = parse_oid("1.3.6.1.2.1.17.2.15.1.3")


class StpPortState(enum.IntEnum):
    DISABLED = 1
    BLOCKING = 2
    LISTENING = 3
    LEARNING = 4
    FORWARDING = 5
    BROKEN = 6


@dataclass(frozen=True, order=True)
class CdpNeighborEntry:
    local_if_index: int
    device_index: int
    neighbor_address: IPv4Address
    neighbor_device_id: str
    neighbor_port: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "neighbor_address", IPv4Address(self.neighbor_address))
        if self.local_if_index < 1 or self.device_index < 1:
            raise ValueError("CDP cache indices must be positive")
        if int(self.neighbor_address) == 0:
            raise ValueError("neighbor address 0.0.0.0 is not a usable address")

    @property
    def index(self) -> tuple[int, int]:
        return (self.local_if_index, self.device_index)


def encode_cdp_cache_rows(entries: Iterable[CdpNeighborEntry]) -> list[VarBind]:
    """Inverse of :func:`decode_cdp_cache_rows`, in walk (column-major) order."""
    rows = sorted(entries, key=lambda e: e.index)
    columns = (
        (COL_ADDRESS_TYPE, lambda e: SnmpValue.integer(CDP_ADDRESS_TYPE_IP)),
        (COL_ADDRESS, lambda e: SnmpValue.octets(e.neighbor_address.packed)),
        (COL_DEVICE_ID, lambda e: SnmpValue.octets(e.neighbor_device_id)),
        (COL_DEVICE_PORT, lambda e: SnmpValue.octets(e.neighbor_port)),
    )
    return [
        VarBind(CDP_CACHE_ENTRY + (col, *e.index), make(e))
        for col, make in columns
        for e in rows
    ]


def decode_cdp_cache_rows(
    varbinds: Sequence[VarBind],
    on_error: Callable[[CdpDecodeError], None] | None = None,
) -> list[CdpNeighborEntry]:
    """Assemble cdpCacheTable rows from a walk of the table subtree.

    Rows missing the address, device-id or port column are skipped, as are
    rows whose address type is not IPv4. A malformed row raises
    :class:`CdpDecodeError` unless ``on_error`` is given, in which case the
    error is handed to it and the row is dropped.
    """
    rows: dict[tuple[int, int], dict[int, SnmpValue]] = {}
    previous: Oid | None = None
    for vb in varbinds:
        if previous is not None and vb.oid <= previous:
            raise OrderingError(f"varbind {vb.oid} does not follow {previous}")
        previous = vb.oid
        if not CDP_CACHE_ENTRY.is_prefix_of(vb.oid):
            continue
        rest = vb.oid.suffix(CDP_CACHE_ENTRY)
        if len(rest) != 3:
            continue
        column, if_index, dev_index = rest
        rows.setdefault((if_index, dev_index), {})[column] = vb.value

    entries = []
    for index in sorted(rows):
        cols = rows[index]
        if not {COL_ADDRESS, COL_DEVICE_ID, COL_DEVICE_PORT} <= cols.keys():
            continue
        addr_type = cols.get(COL_ADDRESS_TYPE)
        if addr_type is not None and addr_type.payload != CDP_ADDRESS_TYPE_IP:
            continue
        try:
            entries.append(_decode_row(index, cols))
        except CdpDecodeError as exc:
            if on_error is None:
                raise
            on_error(exc)
    return entries


def _decode_row(index: tuple[int, int], cols: dict[int, SnmpValue]) -> CdpNeighborEntry:
    addr = cols[COL_ADDRESS].payload
    if not isinstance(addr, bytes):
        raise CdpDecodeError(index, f"address column has kind {cols[COL_ADDRESS].kind.value}")
    if len(addr) != 4:
        raise CdpDecodeError(index, f"address payload is {len(addr)} octets, expected 4")
    texts = []
    for col in (COL_DEVICE_ID, COL_DEVICE_PORT):
        if not isinstance(cols[col].payload, bytes):
            raise CdpDecodeError(index, f"column {col} is not an octet string")
        texts.append(cols[col].as_text())
    try:
        return CdpNeighborEntry(index[0], index[1], IPv4Address(addr), *texts)
    except ValueError as exc:
        raise CdpDecodeError(index, str(exc)) from None
