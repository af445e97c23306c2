"""Ground-truth virtual networks and the SNMP agent views they imply.

A fixture is a YAML (or JSON) document with four top-level arrays::

    devices:
      - deviceId: SW1
        managementIp: 192.168.10.1
        bridgePriority: 32768        # optional, default 32768
        cdpEnabled: true             # optional, default true
        snmpAgent: true              # optional, default true; false = unreachable
        interfaces:
          - {name: Gi0/1, ifIndex: 1, adminStatus: up, routed: false}
    hubs:
      - {hubId: HUB1, ports: [p1, p2, p3]}
    hosts:
      - {hostId: PC1, ip: 192.168.10.100}
    links:
      - {a: [SW1, Gi0/1], b: [SW2, Gi0/1], stpState: auto}

``a`` always names a device interface; ``b`` names a device interface, a
hub port or a host (whose port name is free-form).
"""

from __future__ import annotations

import logging
import random
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from ipaddress import IPv4Address
from pathlib import Path
from typing import Any

import yaml

from cdpmap import mib
from cdpmap.mib import CdpNeighborEntry, Oid, SnmpValue, StpPortState
from cdpmap.transport import AgentAddress, SimulatedRegistry

log = logging.getLogger(__name__)

DEFAULT_PRIORITY = 32768
LINK_STATES = ("forwarding", "blocked", "auto")


class FixtureError(ValueError):
    def __init__(self, location: str, message: str):
        self.location = location
        self.message = message
        super().__init__(f"{location}: {message}")


@dataclass(frozen=True)
class FixtureInterface:
    name: str
    if_index: int
    admin_up: bool = True
    routed: bool = False


@dataclass(frozen=True)
class FixtureDevice:
    device_id: str
    management_ip: IPv4Address
    interfaces: tuple[FixtureInterface, ...] = ()
    bridge_priority: int = DEFAULT_PRIORITY
    cdp_enabled: bool = True
    snmp_agent: bool = True

    def interface(self, name: str) -> FixtureInterface | None:
        for iface in self.interfaces:
            if iface.name == name:
                return iface
        return None


@dataclass(frozen=True)
class FixtureHub:
    hub_id: str
    ports: tuple[str, ...]


@dataclass(frozen=True)
class FixtureHost:
    host_id: str
    ip: IPv4Address | None = None


@dataclass(frozen=True)
class FixtureLink:
    a: tuple[str, str]
    b: tuple[str, str]
    stp_state: str = "auto"


@dataclass(frozen=True)
class NetworkFixture:
    devices: tuple[FixtureDevice, ...]
    links: tuple[FixtureLink, ...] = ()
    hosts: tuple[FixtureHost, ...] = ()
    hubs: tuple[FixtureHub, ...] = ()

    def __post_init__(self) -> None:
        validate_fixture(self)

    def device(self, device_id: str) -> FixtureDevice:
        for d in self.devices:
            if d.device_id == device_id:
                return d
        raise KeyError(device_id)

    def device_by_ip(self, ip: IPv4Address | str) -> FixtureDevice:
        ip = IPv4Address(ip)
        for d in self.devices:
            if d.management_ip == ip:
                return d
        raise KeyError(str(ip))

    @property
    def device_ids(self) -> dict[str, FixtureDevice]:
        return {d.device_id: d for d in self.devices}

    @property
    def hub_ids(self) -> set[str]:
        return {h.hub_id for h in self.hubs}

    @property
    def host_ids(self) -> set[str]:
        return {h.host_id for h in self.hosts}


def validate_fixture(fx: NetworkFixture) -> None:
    ids: set[str] = set()
    ips: set[IPv4Address] = set()
    for i, d in enumerate(fx.devices):
        loc = f"devices[{i}]"
        if d.device_id in ids:
            raise FixtureError(loc, f"duplicate deviceId {d.device_id!r}")
        if d.management_ip in ips:
            raise FixtureError(loc, f"duplicate managementIp {d.management_ip}")
        ids.add(d.device_id)
        ips.add(d.management_ip)
        names, indices = set(), set()
        for j, iface in enumerate(d.interfaces):
            if iface.if_index < 1:
                raise FixtureError(f"{loc}.interfaces[{j}]", "ifIndex must be positive")
            if iface.if_index in indices:
                raise FixtureError(f"{loc}.interfaces[{j}]", f"duplicate ifIndex {iface.if_index}")
            if iface.name in names:
                raise FixtureError(f"{loc}.interfaces[{j}]", f"duplicate interface name {iface.name!r}")
            names.add(iface.name)
            indices.add(iface.if_index)

    hubs = {h.hub_id: set(h.ports) for h in fx.hubs}
    hosts = fx.host_ids
    for name in list(hubs) + list(hosts):
        if name in ids:
            raise FixtureError("hubs/hosts", f"id {name!r} collides with a deviceId")
    if len(hubs) + len(hosts) != len(fx.hubs) + len(fx.hosts):
        raise FixtureError("hubs/hosts", "duplicate hub or host id")

    devices = fx.device_ids
    used: set[tuple[str, str]] = set()
    for i, link in enumerate(fx.links):
        loc = f"links[{i}]"
        if link.stp_state not in LINK_STATES:
            raise FixtureError(f"{loc}.stpState", f"must be one of {'|'.join(LINK_STATES)}, got {link.stp_state!r}")
        if link.a == link.b:
            raise FixtureError(loc, "link endpoints are identical")
        for side, (node, port) in (("a", link.a), ("b", link.b)):
            if node in devices:
                if devices[node].interface(port) is None:
                    raise FixtureError(f"{loc}.{side}", f"device {node!r} has no interface {port!r}")
            elif side == "b" and node in hubs:
                if port not in hubs[node]:
                    raise FixtureError(f"{loc}.{side}", f"hub {node!r} has no port {port!r}")
            elif side == "b" and node in hosts:
                pass
            else:
                what = "device" if side == "a" else "device, hub or host"
                raise FixtureError(f"{loc}.{side}", f"unknown {what} {node!r}")
            if (node, port) in used and node not in hosts:
                raise FixtureError(f"{loc}.{side}", f"{node}:{port} is already cabled")
            used.add((node, port))


# -- loading / dumping --------------------------------------------------------

def _require(obj: dict, key: str, loc: str) -> Any:
    if key not in obj:
        raise FixtureError(loc, f"missing required field {key!r}")
    return obj[key]


def _check_keys(obj: Any, allowed: set[str], loc: str) -> dict:
    if not isinstance(obj, dict):
        raise FixtureError(loc, f"expected a mapping, got {type(obj).__name__}")
    extra = set(obj) - allowed
    if extra:
        raise FixtureError(loc, f"unknown field(s) {sorted(extra)}")
    return obj


def _bool(value: Any, loc: str) -> bool:
    if not isinstance(value, bool):
        raise FixtureError(loc, f"expected true/false, got {value!r}")
    return value


def _ip(value: Any, loc: str) -> IPv4Address:
    try:
        return IPv4Address(str(value))
    except ValueError:
        raise FixtureError(loc, f"not an IPv4 address: {value!r}") from None


def _endpoint(value: Any, loc: str) -> tuple[str, str]:
    if isinstance(value, dict):
        value = [value.get("node"), value.get("port")]
    if not (isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(v, str) for v in value)):
        raise FixtureError(loc, f"expected [node, port], got {value!r}")
    return (value[0], value[1])


def fixture_from_dict(data: Any) -> NetworkFixture:
    top = _check_keys(data, {"devices", "links", "hosts", "hubs"}, "fixture")
    devices = []
    for i, d in enumerate(_require(top, "devices", "fixture") or []):
        loc = f"devices[{i}]"
        _check_keys(d, {"deviceId", "managementIp", "bridgePriority", "cdpEnabled", "snmpAgent", "interfaces"}, loc)
        interfaces = []
        for j, f in enumerate(d.get("interfaces") or []):
            iloc = f"{loc}.interfaces[{j}]"
            _check_keys(f, {"name", "ifIndex", "adminStatus", "routed"}, iloc)
            status = f.get("adminStatus", "up")
            if status not in ("up", "down"):
                raise FixtureError(f"{iloc}.adminStatus", f"must be up|down, got {status!r}")
            if_index = _require(f, "ifIndex", iloc)
            if not isinstance(if_index, int) or isinstance(if_index, bool):
                raise FixtureError(f"{iloc}.ifIndex", f"expected an integer, got {if_index!r}")
            interfaces.append(FixtureInterface(
                str(_require(f, "name", iloc)), if_index, status == "up",
                _bool(f.get("routed", False), f"{iloc}.routed")))
        priority = d.get("bridgePriority", DEFAULT_PRIORITY)
        if not isinstance(priority, int) or isinstance(priority, bool) or not 0 <= priority <= 65535:
            raise FixtureError(f"{loc}.bridgePriority", f"expected an integer in [0, 65535], got {priority!r}")
        devices.append(FixtureDevice(
            device_id=str(_require(d, "deviceId", loc)),
            management_ip=_ip(_require(d, "managementIp", loc), f"{loc}.managementIp"),
            interfaces=tuple(interfaces),
            bridge_priority=priority,
            cdp_enabled=_bool(d.get("cdpEnabled", True), f"{loc}.cdpEnabled"),
            snmp_agent=_bool(d.get("snmpAgent", True), f"{loc}.snmpAgent"),
        ))
    hubs = []
    for i, h in enumerate(top.get("hubs") or []):
        loc = f"hubs[{i}]"
        _check_keys(h, {"hubId", "ports"}, loc)
        hubs.append(FixtureHub(str(_require(h, "hubId", loc)), tuple(str(p) for p in _require(h, "ports", loc))))
    hosts = []
    for i, h in enumerate(top.get("hosts") or []):
        loc = f"hosts[{i}]"
        _check_keys(h, {"hostId", "ip"}, loc)
        ip = _ip(h["ip"], f"{loc}.ip") if h.get("ip") is not None else None
        hosts.append(FixtureHost(str(_require(h, "hostId", loc)), ip))
    links = []
    for i, link in enumerate(top.get("links") or []):
        loc = f"links[{i}]"
        _check_keys(link, {"a", "b", "stpState"}, loc)
        links.append(FixtureLink(_endpoint(_require(link, "a", loc), f"{loc}.a"),
                                 _endpoint(_require(link, "b", loc), f"{loc}.b"),
                                 link.get("stpState", "auto")))
    return NetworkFixture(tuple(devices), tuple(links), tuple(hosts), tuple(hubs))


def load_fixture(path: str | Path) -> NetworkFixture:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FixtureError(str(path), f"cannot read fixture: {exc.strerror or exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise FixtureError(str(path), f"not valid YAML: {exc}") from None
    try:
        return fixture_from_dict(data)
    except FixtureError as exc:
        raise FixtureError(f"{path}: {exc.location}", exc.message) from None


def shipped_fixture(name: str) -> Path:
    """Path of a fixture bundled with the package, e.g. ``figure1``."""
    stem = name.removesuffix(".yaml")
    ref = resources.files("cdpmap") / "fixtures" / f"{stem}.yaml"
    with resources.as_file(ref) as p:
        return Path(p)


def fixture_to_dict(fx: NetworkFixture) -> dict:
    def device(d: FixtureDevice) -> dict:
        out: dict[str, Any] = {"deviceId": d.device_id, "managementIp": str(d.management_ip)}
        if d.bridge_priority != DEFAULT_PRIORITY:
            out["bridgePriority"] = d.bridge_priority
        if not d.cdp_enabled:
            out["cdpEnabled"] = False
        if not d.snmp_agent:
            out["snmpAgent"] = False
        out["interfaces"] = [
            {"name": f.name, "ifIndex": f.if_index, "adminStatus": "up" if f.admin_up else "down",
             **({"routed": True} if f.routed else {})}
            for f in d.interfaces
        ]
        return out

    return {
        "devices": [device(d) for d in fx.devices],
        "hubs": [{"hubId": h.hub_id, "ports": list(h.ports)} for h in fx.hubs],
        "hosts": [{"hostId": h.host_id, **({"ip": str(h.ip)} if h.ip else {})} for h in fx.hosts],
        "links": [{"a": list(l.a), "b": list(l.b), "stpState": l.stp_state} for l in fx.links],
    }


def dump_fixture(fx: NetworkFixture) -> str:
    return yaml.safe_dump(fixture_to_dict(fx), sort_keys=False, default_flow_style=None, width=100)


# -- spanning tree ------------------------------------------------------------

def _is_up(devices: dict[str, FixtureDevice], node: str, port: str) -> bool:
    if node not in devices:
        return True
    iface = devices[node].interface(port)
    return iface is not None and iface.admin_up


def _is_routed(devices: dict[str, FixtureDevice], node: str, port: str) -> bool:
    if node not in devices:
        return False
    iface = devices[node].interface(port)
    return iface is not None and iface.routed


def compute_stp_states(fx: NetworkFixture) -> NetworkFixture:
    """Resolve every ``auto`` link state with a simplified spanning tree.

    Per connected component of bridges (devices plus hubs, over admin-up,
    non-routed, not-declared-blocked links) the root is the device with the
    lowest (bridgePriority, managementIp). Each other node keeps the link to
    the upstream neighbor one hop closer to the root with the lowest
    (priority, ip, local port, remote port); every other auto link blocks.
    Links to hosts and between routed ports forward; links with an
    admin-down end block. Declared states are kept as declared.
    """
    devices = fx.device_ids
    hosts = fx.host_ids

    def key(node: str) -> tuple:
        d = devices.get(node)
        if d is None:  # hub: never preferred over a bridge
            return (1 << 17, 0, node)
        return (d.bridge_priority, int(d.management_ip), "")

    adjacency: dict[str, list[tuple[str, str, str, int]]] = {n: [] for n in devices}
    adjacency.update({h.hub_id: [] for h in fx.hubs})
    resolved: dict[int, str] = {}
    for i, link in enumerate(fx.links):
        (na, pa), (nb, pb) = link.a, link.b
        if link.stp_state != "auto":
            resolved[i] = link.stp_state
        if nb in hosts:
            resolved.setdefault(i, "forwarding")
            continue
        if not (_is_up(devices, na, pa) and _is_up(devices, nb, pb)):
            resolved.setdefault(i, "blocked")
            continue
        if _is_routed(devices, na, pa) or _is_routed(devices, nb, pb):
            resolved.setdefault(i, "forwarding")
            continue
        if link.stp_state == "blocked":
            continue
        adjacency[na].append((nb, pa, pb, i))
        adjacency[nb].append((na, pb, pa, i))

    tree: set[int] = set()
    seen: set[str] = set()
    for root in sorted(devices, key=key):
        if root in seen:
            continue
        dist = {root: 0}
        order = [root]
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, _, _, _ in adjacency[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    order.append(v)
                    queue.append(v)
        seen.update(dist)
        for v in order[1:]:
            candidates = [
                (key(u), local, remote, i)
                for u, local, remote, i in adjacency[v]
                if dist[u] == dist[v] - 1
            ]
            tree.add(min(candidates)[3])

    links = []
    for i, link in enumerate(fx.links):
        state = resolved.get(i) or ("forwarding" if i in tree else "blocked")
        links.append(replace(link, stp_state=state))
    return replace(fx, links=tuple(links))


# -- agent views --------------------------------------------------------------

@dataclass(frozen=True)
class _Port:
    device: FixtureDevice
    iface: FixtureInterface
    state: str


def cdp_adjacencies(fx: NetworkFixture) -> dict[str, list[tuple[FixtureInterface, _Port]]]:
    """For each CDP-speaking device, (local interface, remote port) pairs it hears.

    A pair exists over a direct link or through a hub when both interfaces
    are admin-up and both devices run CDP.
    """
    devices = fx.device_ids
    hub_ports: dict[str, list[_Port]] = {h.hub_id: [] for h in fx.hubs}
    out: dict[str, list[tuple[FixtureInterface, _Port]]] = {d.device_id: [] for d in fx.devices}

    def port(node: str, name: str, state: str) -> _Port | None:
        d = devices[node]
        iface = d.interface(name)
        assert iface is not None
        if not (d.cdp_enabled and iface.admin_up):
            return None
        return _Port(d, iface, state)

    for link in fx.links:
        (na, pa), (nb, pb) = link.a, link.b
        pa_ = port(na, pa, link.stp_state)
        if pa_ is None:
            continue
        if nb in hub_ports:
            hub_ports[nb].append(pa_)
        elif nb in devices:
            pb_ = port(nb, pb, link.stp_state)
            if pb_ is not None:
                out[na].append((pa_.iface, pb_))
                out[nb].append((pb_.iface, pa_))
    for members in hub_ports.values():
        for x in members:
            for y in members:
                if x.device.device_id != y.device.device_id:
                    out[x.device.device_id].append((x.iface, y))
    return out


def build_agent_views(fx: NetworkFixture) -> dict[IPv4Address, dict[Oid, SnmpValue]]:
    """OID-sorted SNMP view for every device that runs an agent."""
    if any(link.stp_state == "auto" for link in fx.links):
        raise ValueError("resolve link states with compute_stp_states before building views")

    port_state: dict[tuple[str, str], str] = {}
    for link in fx.links:
        for node, port in (link.a, link.b):
            port_state[(node, port)] = link.stp_state
    adjacency = cdp_adjacencies(fx)

    views = {}
    for d in fx.devices:
        if not d.snmp_agent:
            continue
        view: dict[Oid, SnmpValue] = {mib.SYS_NAME_0: SnmpValue.octets(d.device_id)}
        for iface in d.interfaces:
            view[mib.IF_DESCR + (iface.if_index,)] = SnmpValue.octets(iface.name)
            view[mib.IF_ADMIN_STATUS + (iface.if_index,)] = SnmpValue.integer(1 if iface.admin_up else 2)
        bridge_port = 0
        for iface in sorted(d.interfaces, key=lambda f: f.if_index):
            if iface.routed:
                continue
            bridge_port += 1
            if not iface.admin_up:
                state = StpPortState.DISABLED
            elif port_state.get((d.device_id, iface.name)) == "blocked":
                state = StpPortState.BLOCKING
            else:
                state = StpPortState.FORWARDING
            view[mib.DOT1D_BASE_PORT_IFINDEX + (bridge_port,)] = SnmpValue.integer(iface.if_index)
            view[mib.DOT1D_STP_PORT_STATE + (bridge_port,)] = SnmpValue.integer(int(state))
        if d.cdp_enabled:
            entries = []
            per_if: dict[int, int] = {}
            pairs = sorted(adjacency[d.device_id],
                           key=lambda p: (p[0].if_index, int(p[1].device.management_ip), p[1].iface.name))
            for local, remote in pairs:
                per_if[local.if_index] = per_if.get(local.if_index, 0) + 1
                entries.append(CdpNeighborEntry(local.if_index, per_if[local.if_index],
                                                remote.device.management_ip,
                                                remote.device.device_id, remote.iface.name))
            for vb in mib.encode_cdp_cache_rows(entries):
                view[vb.oid] = vb.value
        views[d.management_ip] = dict(sorted(view.items()))
    return views


# -- random networks ----------------------------------------------------------

def generate_random_fixture(seed: int, device_count: int, extra_link_count: int = 0) -> NetworkFixture:
    """Random connected network: a random tree plus ``extra_link_count`` chords.

    Devices are SW1..SWn at 10.0.0.1 upward. The result depends only on the
    arguments.
    """
    if device_count < 1:
        raise ValueError("deviceCount must be at least 1")
    if extra_link_count < 0:
        raise ValueError("extraLinkCount must be non-negative")
    rng = random.Random(seed)
    pairs = [(rng.randrange(i), i) for i in range(1, device_count)]
    linked = {frozenset(p) for p in pairs}
    remainder = device_count * (device_count - 1) // 2 - len(pairs)
    if extra_link_count > remainder:
        log.warning("extraLinkCount %d exceeds the %d free device pairs; capped", extra_link_count, remainder)
        extra_link_count = remainder
    if extra_link_count:
        free = [(i, j) for i in range(device_count) for j in range(i + 1, device_count)
                if frozenset((i, j)) not in linked]
        pairs.extend(rng.sample(free, extra_link_count))

    ports: list[list[FixtureInterface]] = [[] for _ in range(device_count)]

    def new_port(dev: int) -> str:
        k = len(ports[dev]) + 1
        iface = FixtureInterface(f"GigabitEthernet0/{k}", k)
        ports[dev].append(iface)
        return iface.name

    links = [FixtureLink((f"SW{i + 1}", new_port(i)), (f"SW{j + 1}", new_port(j))) for i, j in pairs]
    base = IPv4Address("10.0.0.1")
    devices = tuple(
        FixtureDevice(f"SW{i + 1}", base + i, tuple(ports[i])) for i in range(device_count)
    )
    return NetworkFixture(devices, tuple(links))


@dataclass
class SimulatedNetwork:
    """A fixture with resolved STP states and its per-device agent views."""

    fixture: NetworkFixture
    views: dict[IPv4Address, dict[Oid, SnmpValue]] = field(init=False)

    def __post_init__(self) -> None:
        self.fixture = compute_stp_states(self.fixture)
        self.views = build_agent_views(self.fixture)

    def registry(self, port: int = 161) -> SimulatedRegistry:
        reg = SimulatedRegistry()
        for ip, view in self.views.items():
            reg.register(AgentAddress(ip, port), view)
        return reg
