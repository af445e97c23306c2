"""Breadth-first CDP crawl producing a physical topology graph.

The crawl starts at a root agent, reads its CDP cache, queues every
neighbor address not seen before, and repeats level by level until the
queue is empty. The root is level 1. Links that spanning tree currently
blocks still carry CDP, so they are discovered too and marked
``stp-blocked``.
"""

from __future__ import annotations

import enum
import logging
import time
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from ipaddress import IPv4Address
from typing import Protocol

from cdpmap import mib
from cdpmap.mib import CdpDecodeError, CdpNeighborEntry, Oid, StpPortState, ValueKind, VarBind
from cdpmap.transport import (
    AgentAddress,
    Credentials,
    TransportConfig,
    TransportError,
    WalkResult,
)

log = logging.getLogger(__name__)


class Transport(Protocol):
    def walk(self, agent: AgentAddress, base: Oid, creds: Credentials,
             cfg: TransportConfig = ...) -> WalkResult: ...

    def get(self, agent: AgentAddress, oids: Sequence[Oid], creds: Credentials,
            cfg: TransportConfig = ...) -> list[VarBind]: ...


class RootUnreachableError(Exception):
    def __init__(self, root: AgentAddress, cause: Exception):
        self.root = root
        self.cause = cause
        super().__init__(f"root device {root} unreachable: {cause}")


class QueryStatus(str, enum.Enum):
    QUERIED = "queried"
    UNREACHABLE = "unreachable"
    NOT_QUERIED = "not-queried"


class LinkState(str, enum.Enum):
    FORWARDING = "forwarding"
    STP_BLOCKED = "stp-blocked"


@dataclass
class DeviceNode:
    management_ip: IPv4Address
    device_id: str
    level: int
    query_status: QueryStatus = QueryStatus.NOT_QUERIED


@dataclass(frozen=True, order=True)
class Endpoint:
    ip: IPv4Address
    port: str

    def __str__(self) -> str:
        return f"{self.ip}:{self.port}"


@dataclass
class TopologyEdge:
    a: Endpoint
    b: Endpoint
    state: LinkState
    reported_by: frozenset[str]

    @property
    def key(self) -> tuple[Endpoint, Endpoint]:
        return (self.a, self.b)


@dataclass
class TopologyGraph:
    root_ip: IPv4Address
    nodes: dict[IPv4Address, DeviceNode] = field(default_factory=dict)
    edges: dict[tuple[Endpoint, Endpoint], TopologyEdge] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def sorted_nodes(self) -> list[DeviceNode]:
        return [self.nodes[ip] for ip in sorted(self.nodes)]

    def sorted_edges(self) -> list[TopologyEdge]:
        return [self.edges[k] for k in sorted(self.edges)]


def merge_edge(graph: TopologyGraph, local: Endpoint, remote: Endpoint,
               state: LinkState) -> tuple[Endpoint, Endpoint] | None:
    """Record one side's report of a link; returns the canonical edge key.

    A reversed report of an existing edge updates it instead of adding a
    duplicate. A link blocked on either side is blocked. Self-edges are
    rejected (``None``) with a warning.
    """
    if local.ip == remote.ip:
        graph.warnings.append(f"self-edge {local} -> {remote} ignored")
        return None
    if remote.ip not in graph.nodes:
        parent = graph.nodes.get(local.ip)
        level = parent.level + 1 if parent else 2
        graph.nodes[remote.ip] = DeviceNode(remote.ip, str(remote.ip), level)
    a, b = sorted((local, remote))
    side = "a" if local == a else "b"
    edge = graph.edges.get((a, b))
    if edge is None:
        graph.edges[(a, b)] = TopologyEdge(a, b, state, frozenset({side}))
    else:
        edge.reported_by |= {side}
        if state is LinkState.STP_BLOCKED:
            edge.state = LinkState.STP_BLOCKED
    return (a, b)


# -- per-device retrieval ---------------------------------------------------

@dataclass(frozen=True)
class Neighbor:
    entry: CdpNeighborEntry
    local_port: str
    state: LinkState


@dataclass
class NeighborReport:
    device: AgentAddress
    sys_name: str | None
    neighbors: list[Neighbor]
    warnings: list[str] = field(default_factory=list)


def _stp_states_by_ifindex(device: AgentAddress, transport: Transport, creds: Credentials,
                           cfg: TransportConfig) -> dict[int, int]:
    port_if = {
        vb.oid.arcs[-1]: vb.value.payload
        for vb in transport.walk(device, mib.DOT1D_BASE_PORT_IFINDEX, creds, cfg).varbinds
        if vb.value.kind is ValueKind.INTEGER
    }
    states = {}
    for vb in transport.walk(device, mib.DOT1D_STP_PORT_STATE, creds, cfg).varbinds:
        port = vb.oid.arcs[-1]
        if port in port_if and vb.value.kind is ValueKind.INTEGER:
            states[port_if[port]] = vb.value.payload
    return states


def _to_link_state(raw: int | None) -> LinkState:
    if raw is None or raw == StpPortState.FORWARDING:
        return LinkState.FORWARDING
    # blocking, listening, learning; disabled/broken ports pass no data either
    return LinkState.STP_BLOCKED


def link_state_of(device: AgentAddress, local_if_index: int, transport: Transport,
                  creds: Credentials, cfg: TransportConfig = TransportConfig()) -> LinkState:
    """STP state of one local port, read through dot1dBasePortIfIndex.

    A port missing from the bridge MIB (a routed port, say) counts as
    forwarding.
    """
    states = _stp_states_by_ifindex(device, transport, creds, cfg)
    if local_if_index not in states:
        log.warning("%s: ifIndex %d not in bridge MIB; assuming forwarding", device, local_if_index)
    return _to_link_state(states.get(local_if_index))


def fetch_neighbors(device: AgentAddress, transport: Transport, creds: Credentials,
                    cfg: TransportConfig = TransportConfig()) -> NeighborReport:
    """Read one device's CDP cache and resolve local port names and STP states.

    Transport errors propagate; malformed cache rows are skipped with a
    warning.
    """
    warnings: list[str] = []
    name_vb = transport.get(device, [mib.SYS_NAME_0], creds, cfg)[0]
    sys_name = name_vb.value.as_text() if name_vb.value.kind is ValueKind.OCTET_STRING else None

    cache = transport.walk(device, mib.CDP_CACHE_TABLE, creds, cfg).varbinds

    def skip(exc: CdpDecodeError) -> None:
        warnings.append(f"{device.ip}: skipped {exc}")

    entries = mib.decode_cdp_cache_rows(cache, on_error=skip)
    if not entries:
        return NeighborReport(device, sys_name, [], warnings)

    if_names = {
        vb.oid.arcs[-1]: vb.value.as_text()
        for vb in transport.walk(device, mib.IF_DESCR, creds, cfg).varbinds
        if vb.value.kind is ValueKind.OCTET_STRING
    }
    states = _stp_states_by_ifindex(device, transport, creds, cfg)

    neighbors = []
    for e in entries:
        if e.neighbor_address == device.ip:
            warnings.append(f"{device.ip}: dropped self-referencing CDP row {e.local_if_index}.{e.device_index}")
            continue
        local = if_names.get(e.local_if_index)
        if local is None:
            local = f"ifIndex{e.local_if_index}"
            warnings.append(f"{device.ip}: no ifDescr for ifIndex {e.local_if_index}")
        if e.local_if_index not in states:
            warnings.append(f"{device.ip}: {local} not in bridge MIB; assuming forwarding")
        neighbors.append(Neighbor(e, local, _to_link_state(states.get(e.local_if_index))))
    return NeighborReport(device, sys_name, neighbors, warnings)


# -- the crawl ----------------------------------------------------------------

@dataclass(frozen=True)
class DiscoveryConfig:
    transport: TransportConfig = TransportConfig()
    parallelism: int = 8
    max_level: int = 0  # 0 = unlimited

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        if self.max_level < 0:
            raise ValueError("max_level must be non-negative")


@dataclass(frozen=True)
class DiscoveryStep:
    """One BFS level: who was queried, whom they reported, who was new."""

    level: int
    queried: tuple[IPv4Address, ...]
    neighbors: tuple[IPv4Address, ...]  # reported addresses not queried at an earlier step
    new: tuple[IPv4Address, ...]


@dataclass
class DiscoveryReport:
    graph: TopologyGraph
    outcomes: dict[IPv4Address, QueryStatus]
    retrieval_seconds: float
    assembly_seconds: float
    steps: list[DiscoveryStep]

    @property
    def warnings(self) -> list[str]:
        return self.graph.warnings

    @property
    def unreachable(self) -> list[IPv4Address]:
        return sorted(ip for ip, s in self.outcomes.items() if s is QueryStatus.UNREACHABLE)


def discover(root: AgentAddress, transport: Transport, creds: Credentials,
             cfg: DiscoveryConfig = DiscoveryConfig()) -> DiscoveryReport:
    graph = TopologyGraph(root.ip)
    graph.nodes[root.ip] = DeviceNode(root.ip, str(root.ip), 1)
    outcomes: dict[IPv4Address, QueryStatus] = {}
    steps: list[DiscoveryStep] = []
    queried_before: set[IPv4Address] = set()
    retrieval = assembly = 0.0

    def fetch(ip: IPv4Address) -> NeighborReport | TransportError:
        try:
            return fetch_neighbors(AgentAddress(ip, root.port), transport, creds, cfg.transport)
        except TransportError as exc:
            return exc

    frontier = [root.ip]
    level = 1
    pool = ThreadPoolExecutor(cfg.parallelism) if cfg.parallelism > 1 else None
    try:
        while frontier and not (cfg.max_level and level > cfg.max_level):
            frontier.sort()
            t0 = time.perf_counter()
            results = list(pool.map(fetch, frontier) if pool else map(fetch, frontier))
            t1 = time.perf_counter()
            retrieval += t1 - t0

            reported: set[IPv4Address] = set()
            new: list[IPv4Address] = []
            for ip, result in zip(frontier, results):
                node = graph.nodes[ip]
                if isinstance(result, TransportError):
                    if ip == root.ip:
                        raise RootUnreachableError(root, result)
                    node.query_status = outcomes[ip] = QueryStatus.UNREACHABLE
                    graph.warnings.append(f"{ip}: {result}")
                    continue
                node.query_status = outcomes[ip] = QueryStatus.QUERIED
                if result.sys_name:
                    node.device_id = result.sys_name
                graph.warnings.extend(result.warnings)
                for n in result.neighbors:
                    addr = n.entry.neighbor_address
                    reported.add(addr)
                    if addr not in graph.nodes:
                        graph.nodes[addr] = DeviceNode(addr, n.entry.neighbor_device_id, level + 1)
                        new.append(addr)
                    merge_edge(graph, Endpoint(ip, n.local_port),
                               Endpoint(addr, n.entry.neighbor_port), n.state)
            steps.append(DiscoveryStep(level, tuple(frontier),
                                       tuple(sorted(reported - queried_before)), tuple(sorted(new))))
            queried_before.update(frontier)
            frontier = new
            level += 1
            assembly += time.perf_counter() - t1
    finally:
        if pool:
            pool.shutdown()

    t1 = time.perf_counter()
    ids = Counter(n.device_id for n in graph.nodes.values())
    for device_id, count in sorted(ids.items()):
        if count > 1:
            ips = sorted(n.management_ip for n in graph.nodes.values() if n.device_id == device_id)
            graph.warnings.append(
                f"deviceId {device_id!r} seen at {', '.join(map(str, ips))}; possible aliases, not merged")
    assembly += time.perf_counter() - t1
    return DiscoveryReport(graph, outcomes, retrieval, assembly, steps)
