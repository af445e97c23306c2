"""SNMP WALK/GET over two interchangeable backends.

:class:`SimulatedRegistry` answers from in-memory MIB views;
:class:`UdpTransport` speaks SNMPv2c over UDP. Both run the same
GETBULK-driven walk loop, so they differ only in how one PDU is exchanged.
:class:`AgentServer` serves a view over UDP so the two can be compared on
loopback.
"""

from __future__ import annotations

import bisect
import itertools
import logging
import random
import socket
import socketserver
import threading
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from ipaddress import IPv4Address

from cdpmap import ber
from cdpmap.mib import END_OF_MIB_VIEW, NO_SUCH_OBJECT, Oid, SnmpValue, ValueKind, VarBind

log = logging.getLogger(__name__)


class TransportError(Exception):
    pass


class UnreachableError(TransportError):
    def __init__(self, agent: AgentAddress, reason: str = "no response"):
        self.agent = agent
        super().__init__(f"agent {agent} unreachable: {reason}")


class ProtocolError(TransportError):
    """The agent answered with something a correct agent never sends."""


class RegistrationError(TransportError):
    pass


@dataclass(frozen=True, order=True)
class AgentAddress:
    ip: IPv4Address
    port: int = 161

    def __post_init__(self) -> None:
        object.__setattr__(self, "ip", IPv4Address(self.ip))
        if not 1 <= self.port <= 65535:
            raise ValueError(f"UDP port out of range: {self.port}")

    def __str__(self) -> str:
        return f"{self.ip}:{self.port}"


@dataclass(frozen=True)
class Credentials:
    community: str = "public"

    def __post_init__(self) -> None:
        if not self.community:
            raise ValueError("community string must be non-empty")


@dataclass(frozen=True)
class TransportConfig:
    timeout_ms: int = 2000
    retries: int = 1
    max_repetitions: int = 20

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")
        if self.max_repetitions < 1:
            raise ValueError("maxRepetitions must be at least 1")


@dataclass(frozen=True)
class WalkResult:
    varbinds: tuple[VarBind, ...]
    request_count: int


class MibView:
    """Sorted, read-only OID -> value store with agent-side GET semantics."""

    def __init__(self, items: Mapping[Oid, SnmpValue] | Iterable[tuple[Oid, SnmpValue]]):
        pairs = items.items() if isinstance(items, Mapping) else items
        self._values = dict(pairs)
        self._oids = sorted(self._values)

    def __len__(self) -> int:
        return len(self._oids)

    def items(self) -> list[tuple[Oid, SnmpValue]]:
        return [(o, self._values[o]) for o in self._oids]

    def get(self, oid: Oid) -> SnmpValue:
        return self._values.get(oid, NO_SUCH_OBJECT)

    def next(self, oid: Oid) -> VarBind:
        i = bisect.bisect_right(self._oids, oid)
        if i == len(self._oids):
            return VarBind(oid, END_OF_MIB_VIEW)
        found = self._oids[i]
        return VarBind(found, self._values[found])

    def bulk(self, oid: Oid, max_repetitions: int) -> list[VarBind]:
        i = bisect.bisect_right(self._oids, oid)
        chunk = self._oids[i:i + max_repetitions]
        out = [VarBind(o, self._values[o]) for o in chunk]
        if len(out) < max_repetitions:
            out.append(VarBind(chunk[-1] if chunk else oid, END_OF_MIB_VIEW))
        return out

    def subtree(self, base: Oid) -> list[VarBind]:
        i = bisect.bisect_right(self._oids, base)
        out = []
        for o in self._oids[i:]:
            if not base.is_prefix_of(o):
                break
            out.append(VarBind(o, self._values[o]))
        return out


def _walk_loop(fetch: Callable[[Oid], tuple[list[VarBind], int]], base: Oid) -> WalkResult:
    """Call ``fetch`` until the walk leaves ``base``.

    ``fetch`` returns the successors of an OID and the number of PDUs it
    sent to get them.
    """
    out: list[VarBind] = []
    current = base
    requests = 0
    while True:
        batch, sent = fetch(current)
        requests += sent
        if not batch:
            return WalkResult(tuple(out), requests)
        for vb in batch:
            if vb.value.kind is ValueKind.END_OF_MIB_VIEW or not base.is_prefix_of(vb.oid):
                return WalkResult(tuple(out), requests)
            if vb.oid <= current:
                raise ProtocolError(f"agent returned {vb.oid} after {current}; walk would not progress")
            out.append(vb)
            current = vb.oid


@dataclass(frozen=True)
class RequestRecord:
    agent: AgentAddress
    operation: str
    oid: Oid


class SimulatedRegistry:
    """In-process agents keyed by address. No network I/O.

    Registration must finish before discovery starts; after that the
    registry is only read, apart from the thread-safe request log.
    """

    def __init__(self) -> None:
        self._agents: dict[AgentAddress, tuple[MibView, str | None]] = {}
        self._lock = threading.Lock()
        self.log: list[RequestRecord] = []

    def register(self, address: AgentAddress, view: Mapping[Oid, SnmpValue] | MibView,
                 community: str | None = None) -> None:
        if address in self._agents:
            raise RegistrationError(f"agent {address} already registered")
        if not isinstance(view, MibView):
            view = MibView(view)
        self._agents[address] = (view, community)

    def __contains__(self, address: AgentAddress) -> bool:
        return address in self._agents

    def _view(self, agent: AgentAddress, creds: Credentials) -> MibView:
        try:
            view, community = self._agents[agent]
        except KeyError:
            raise UnreachableError(agent, "no simulated agent registered") from None
        if community is not None and community != creds.community:
            # a real agent silently drops a bad community; the manager sees a timeout
            raise UnreachableError(agent, "no response (community rejected)")
        return view

    def _record(self, agent: AgentAddress, operation: str, oid: Oid) -> None:
        with self._lock:
            self.log.append(RequestRecord(agent, operation, oid))

    def walk(self, agent: AgentAddress, base: Oid, creds: Credentials,
             cfg: TransportConfig = TransportConfig()) -> WalkResult:
        view = self._view(agent, creds)
        self._record(agent, "walk", base)
        return _walk_loop(lambda oid: (view.bulk(oid, cfg.max_repetitions), 1), base)

    def get(self, agent: AgentAddress, oids: Sequence[Oid], creds: Credentials,
            cfg: TransportConfig = TransportConfig()) -> list[VarBind]:
        if not oids:
            raise ValueError("get requires at least one OID")
        view = self._view(agent, creds)
        for oid in oids:
            self._record(agent, "get", oid)
        return [VarBind(o, view.get(o)) for o in oids]


def register_simulated_agent(registry: SimulatedRegistry, address: AgentAddress,
                             view: Mapping[Oid, SnmpValue] | MibView) -> None:
    registry.register(address, view)


class UdpTransport:
    """SNMPv2c manager over UDP.

    ``endpoints`` optionally redirects agent addresses to other UDP
    endpoints, which is how loopback test agents stand in for devices whose
    management IPs are not local.
    """

    def __init__(self, endpoints: Mapping[AgentAddress, tuple[str, int]] | None = None):
        self.endpoints = dict(endpoints or {})
        self._ids = itertools.count(random.randrange(1, 2**30))
        self._lock = threading.Lock()
        self._no_bulk: set[AgentAddress] = set()

    def _next_id(self) -> int:
        with self._lock:
            return next(self._ids) % (2**31 - 1) or 1

    def _exchange(self, agent: AgentAddress, creds: Credentials, cfg: TransportConfig,
                  pdu: ber.Pdu) -> ber.Pdu:
        target = self.endpoints.get(agent, (str(agent.ip), agent.port))
        payload = ber.encode_message(ber.Message(creds.community.encode(), pdu))
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
            sock.settimeout(cfg.timeout_ms / 1000)
            for attempt in range(cfg.retries + 1):
                try:
                    sock.sendto(payload, target)
                    while True:
                        data, _ = sock.recvfrom(65535)
                        try:
                            reply = ber.decode_message(data)
                        except ber.BerError as exc:
                            raise ProtocolError(f"undecodable response from {agent}: {exc}") from None
                        if reply.pdu.request_id == pdu.request_id:
                            if reply.pdu.type is not ber.PduType.RESPONSE:
                                raise ProtocolError(f"{agent} sent {reply.pdu.type.name}, expected RESPONSE")
                            return reply.pdu
                        # stale reply from an earlier attempt; keep listening
                except socket.timeout:
                    log.debug("timeout from %s (attempt %d)", agent, attempt + 1)
                except OSError as exc:
                    raise UnreachableError(agent, str(exc)) from None
        raise UnreachableError(agent, f"no response after {cfg.retries + 1} attempt(s)")

    def _fetch_bulk(self, agent: AgentAddress, creds: Credentials, cfg: TransportConfig,
                    oid: Oid) -> tuple[list[VarBind], int]:
        sent = 0
        if agent not in self._no_bulk:
            reply = self._exchange(agent, creds, cfg,
                                   ber.get_bulk(self._next_id(), [oid], cfg.max_repetitions))
            sent += 1
            if reply.error_status == ber.ErrorStatus.NO_ERROR:
                return _checked(reply), sent
            log.info("GETBULK to %s failed (error-status %d); falling back to GETNEXT",
                     agent, reply.error_status)
            with self._lock:
                self._no_bulk.add(agent)
        reply = self._exchange(agent, creds, cfg,
                               ber.request(ber.PduType.GET_NEXT, self._next_id(), [oid]))
        if reply.error_status != ber.ErrorStatus.NO_ERROR:
            raise ProtocolError(f"GETNEXT to {agent} failed with error-status {reply.error_status}")
        return _checked(reply), sent + 1

    def walk(self, agent: AgentAddress, base: Oid, creds: Credentials,
             cfg: TransportConfig = TransportConfig()) -> WalkResult:
        return _walk_loop(lambda oid: self._fetch_bulk(agent, creds, cfg, oid), base)

    def get(self, agent: AgentAddress, oids: Sequence[Oid], creds: Credentials,
            cfg: TransportConfig = TransportConfig()) -> list[VarBind]:
        if not oids:
            raise ValueError("get requires at least one OID")
        reply = self._exchange(agent, creds, cfg,
                               ber.request(ber.PduType.GET, self._next_id(), list(oids)))
        if reply.error_status != ber.ErrorStatus.NO_ERROR:
            raise ProtocolError(f"GET to {agent} failed with error-status {reply.error_status}")
        got = _checked(reply)
        if [vb.oid for vb in got] != list(oids):
            raise ProtocolError(f"GET response from {agent} does not match the requested OIDs")
        return got


def _checked(pdu: ber.Pdu) -> list[VarBind]:
    if any(vb.value is None for vb in pdu.varbinds):
        raise ProtocolError("response carries a NULL value")
    return pdu.varbinds


# -- agent side ---------------------------------------------------------------

MAX_RESPONSE_OCTETS = 65000


def answer(view: MibView, pdu: ber.Pdu, *, bulk_supported: bool = True) -> ber.Pdu:
    """Build the Response PDU a v2c agent serving ``view`` sends for ``pdu``."""
    def response(varbinds: list[VarBind], status: int = 0, index: int = 0) -> ber.Pdu:
        return ber.Pdu(ber.PduType.RESPONSE, pdu.request_id, varbinds, status, index)

    oids = [vb.oid for vb in pdu.varbinds]
    if pdu.type is ber.PduType.GET:
        return response([VarBind(o, view.get(o)) for o in oids])
    if pdu.type is ber.PduType.GET_NEXT:
        return response([view.next(o) for o in oids])
    if pdu.type is ber.PduType.GET_BULK and bulk_supported:
        n = max(0, min(pdu.non_repeaters, len(oids)))
        out = [view.next(o) for o in oids[:n]]
        repeaters = oids[n:]
        cursors = list(repeaters)
        for _ in range(max(0, pdu.max_repetitions) if repeaters else 0):
            row = [view.next(c) for c in cursors]
            out.extend(row)
            cursors = [vb.oid for vb in row]
            if all(vb.value.is_exception for vb in row):
                break
        return response(out)
    return response(list(pdu.varbinds), ber.ErrorStatus.GEN_ERR, 1)


class _Handler(socketserver.BaseRequestHandler):
    server: _UdpServer

    def handle(self) -> None:
        data, sock = self.request
        try:
            msg = ber.decode_message(data)
        except ber.BerError:
            return
        if msg.version != ber.SNMP_V2C or msg.community != self.server.community:
            return
        reply = answer(self.server.view, msg.pdu, bulk_supported=self.server.bulk_supported)
        encoded = ber.encode_message(ber.Message(msg.community, reply))
        while len(encoded) > MAX_RESPONSE_OCTETS and reply.varbinds:
            reply.varbinds = reply.varbinds[:len(reply.varbinds) // 2]
            encoded = ber.encode_message(ber.Message(msg.community, reply))
        sock.sendto(encoded, self.client_address)


class _UdpServer(socketserver.ThreadingUDPServer):
    daemon_threads = True
    view: MibView
    community: bytes
    bulk_supported: bool


class AgentServer:
    """A v2c agent for one view, bound to a UDP port (ephemeral by default).

    Use as a context manager::

        with AgentServer(view) as server:
            UdpTransport().walk(server.address, base, creds)
    """

    def __init__(self, view: Mapping[Oid, SnmpValue] | MibView, community: str = "public",
                 host: str = "127.0.0.1", port: int = 0, *, bulk_supported: bool = True):
        self._server = _UdpServer((host, port), _Handler)
        self._server.view = view if isinstance(view, MibView) else MibView(view)
        self._server.community = community.encode()
        self._server.bulk_supported = bulk_supported
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def address(self) -> AgentAddress:
        host, port = self.endpoint
        return AgentAddress(IPv4Address(host), port)

    def start(self) -> AgentServer:
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        kwargs={"poll_interval": 0.05}, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> AgentServer:
        return self.start()

    def __exit__(self, *exc: object) -> None:
        self.stop()


@dataclass
class LoopbackNetwork:
    """One :class:`AgentServer` per view, plus a transport routed to them."""

    views: Mapping[AgentAddress, Mapping[Oid, SnmpValue]]
    community: str = "public"
    servers: dict[AgentAddress, AgentServer] = field(default_factory=dict)

    def __enter__(self) -> UdpTransport:
        for addr, view in self.views.items():
            self.servers[addr] = AgentServer(view, self.community).start()
        return UdpTransport({a: s.endpoint for a, s in self.servers.items()})

    def __exit__(self, *exc: object) -> None:
        for server in self.servers.values():
            server.stop()
        self.servers.clear()
