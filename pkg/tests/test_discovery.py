from collections import Counter
from ipaddress import IPv4Address

import pytest
from conftest import fixture_from_yaml
from hypothesis import given
from oracles import discovered_edges, expected_topology, hop_distances
from strategies import networks

from cdpmap import mib
from cdpmap.discovery import (
    DiscoveryConfig,
    Endpoint,
    LinkState,
    QueryStatus,
    RootUnreachableError,
    TopologyGraph,
    DeviceNode,
    discover,
    fetch_neighbors,
    link_state_of,
    merge_edge,
)
from cdpmap.export import to_json
from cdpmap.mib import CdpNeighborEntry, SnmpValue, encode_cdp_cache_rows
from cdpmap.simulator import SimulatedNetwork, generate_random_fixture
from cdpmap.transport import AgentAddress, Credentials, LoopbackNetwork, SimulatedRegistry

CREDS = Credentials()


def ip(last, prefix="192.168.10."):
    return IPv4Address(prefix + str(last))


def run(fx, root_id="SW1", **cfg):
    net = SimulatedNetwork(fx)
    reg = net.registry()
    root = net.fixture.device(root_id).management_ip
    return net, reg, discover(AgentAddress(root), reg, CREDS, DiscoveryConfig(**cfg))


# -- reference network crawl ---------------------------------------------------

def test_figure1_steps_and_levels(figure1_fixture):
    _, _, report = run(figure1_fixture)
    steps = [(set(s.queried), set(s.neighbors), set(s.new)) for s in report.steps]
    assert steps == [
        ({ip(1)}, {ip(2), ip(3)}, {ip(2), ip(3)}),
        ({ip(2), ip(3)}, {ip(4), ip(5), ip(6)}, {ip(4), ip(5), ip(6)}),
        ({ip(4), ip(5), ip(6)}, {ip(4), ip(5), ip(6)}, set()),
    ]
    levels = {str(n.management_ip): n.level for n in report.graph.nodes.values()}
    assert levels == {"192.168.10.1": 1, "192.168.10.2": 2, "192.168.10.3": 2,
                      "192.168.10.4": 3, "192.168.10.5": 3, "192.168.10.6": 3}
    assert all(n.query_status is QueryStatus.QUERIED for n in report.graph.nodes.values())
    assert report.warnings == []


def test_isolated_root():
    fx = fixture_from_yaml("devices: [{deviceId: SW1, managementIp: 10.1.1.1}]")
    _, _, report = run(fx)
    assert list(report.graph.nodes) == [IPv4Address("10.1.1.1")]
    assert report.graph.nodes[IPv4Address("10.1.1.1")].level == 1
    assert report.graph.edges == {}


def test_random_ten_device_edge_set_matches_fixture():
    fx = generate_random_fixture(21, 10, 4)
    net, _, report = run(fx)
    nodes, edges = expected_topology(net.fixture, "SW1")
    assert {str(i) for i in report.graph.nodes} == nodes
    assert discovered_edges(report.graph) == edges
    assert len(edges) == 13


def test_root_unreachable():
    with pytest.raises(RootUnreachableError) as exc:
        discover(AgentAddress("192.0.2.1"), SimulatedRegistry(), CREDS)
    assert exc.value.root == AgentAddress("192.0.2.1")


# -- fetch_neighbors ------------------------------------------------------------

def test_fetch_neighbors_sw1(figure1_net):
    report = fetch_neighbors(AgentAddress(ip(1)), figure1_net.registry(), CREDS)
    assert report.sys_name == "SW1"
    assert [(str(n.entry.neighbor_address), n.local_port, n.entry.neighbor_port) for n in report.neighbors] == [
        ("192.168.10.2", "GigabitEthernet0/1", "GigabitEthernet0/1"),
        ("192.168.10.3", "GigabitEthernet0/2", "GigabitEthernet0/1"),
    ]


def test_fetch_neighbors_cdp_disabled():
    fx = fixture_from_yaml("""
        devices:
          - {deviceId: SW1, managementIp: 10.0.0.1, cdpEnabled: false, interfaces: [{name: e1, ifIndex: 1}]}
          - {deviceId: SW2, managementIp: 10.0.0.2, interfaces: [{name: e1, ifIndex: 1}]}
        links: [{a: [SW1, e1], b: [SW2, e1]}]
    """)
    reg = SimulatedNetwork(fx).registry()
    assert fetch_neighbors(AgentAddress("10.0.0.1"), reg, CREDS).neighbors == []


ADMIN_DOWN = """
devices:
  - deviceId: SW1
    managementIp: 10.0.0.1
    interfaces: [{name: e1, ifIndex: 1}, {name: e2, ifIndex: 2, adminStatus: down}]
  - {deviceId: SW2, managementIp: 10.0.0.2, interfaces: [{name: e1, ifIndex: 1}]}
  - {deviceId: SW3, managementIp: 10.0.0.3, interfaces: [{name: e1, ifIndex: 1}]}
links:
  - {a: [SW1, e1], b: [SW2, e1]}
  - {a: [SW1, e2], b: [SW3, e1]}
"""


def test_fetch_neighbors_skips_admin_down():
    fx = fixture_from_yaml(ADMIN_DOWN)
    reg = SimulatedNetwork(fx).registry()
    got = {str(n.entry.neighbor_address) for n in fetch_neighbors(AgentAddress("10.0.0.1"), reg, CREDS).neighbors}
    # oracle: fixture links minus the admin-down one
    expected = {str(fx.device(l.b[0]).management_ip) for l in fx.links
                if fx.device(l.a[0]).interface(l.a[1]).admin_up and fx.device(l.b[0]).interface(l.b[1]).admin_up}
    assert got == expected == {"10.0.0.2"}


def _handmade(entries, extra=None):
    view = {mib.SYS_NAME_0: SnmpValue.octets("X"), mib.IF_DESCR + (1,): SnmpValue.octets("e1")}
    for vb in encode_cdp_cache_rows(entries):
        view[vb.oid] = vb.value
    view.update(extra or {})
    reg = SimulatedRegistry()
    reg.register(AgentAddress("10.9.9.1"), view)
    return reg


def test_fetch_neighbors_drops_self_rows_and_bad_rows():
    entries = [CdpNeighborEntry(1, 1, IPv4Address("10.9.9.1"), "X", "e9"),
               CdpNeighborEntry(1, 2, IPv4Address("10.9.9.2"), "Y", "e1")]
    bad = {mib.CDP_CACHE_ENTRY + (col, 1, 3): v for col, v in (
        (mib.COL_ADDRESS, SnmpValue.octets(b"\x01\x02")),
        (mib.COL_DEVICE_ID, SnmpValue.octets("Z")),
        (mib.COL_DEVICE_PORT, SnmpValue.octets("e1")))}
    report = fetch_neighbors(AgentAddress("10.9.9.1"), _handmade(entries, bad), CREDS)
    assert [str(n.entry.neighbor_address) for n in report.neighbors] == ["10.9.9.2"]
    assert any("self-referencing" in w for w in report.warnings)
    assert any("1.3" in w and "octets" in w for w in report.warnings)
    # no bridge MIB at all: forwarding by default, with a warning
    assert report.neighbors[0].state is LinkState.FORWARDING
    assert any("bridge MIB" in w for w in report.warnings)


# -- link_state_of ------------------------------------------------------------

def _bridge_view(states):
    view = {}
    for port, (if_index, state) in enumerate(states, start=1):
        view[mib.DOT1D_BASE_PORT_IFINDEX + (port,)] = SnmpValue.integer(if_index)
        view[mib.DOT1D_STP_PORT_STATE + (port,)] = SnmpValue.integer(state)
    reg = SimulatedRegistry()
    reg.register(AgentAddress("10.9.9.1"), view)
    return reg


@pytest.mark.parametrize("state,expected", [
    (5, LinkState.FORWARDING),
    (2, LinkState.STP_BLOCKED),
    (3, LinkState.STP_BLOCKED),
    (4, LinkState.STP_BLOCKED),
])
def test_link_state_mapping(state, expected):
    reg = _bridge_view([(101, 5), (102, state)])
    assert link_state_of(AgentAddress("10.9.9.1"), 102, reg, CREDS) is expected


def test_link_state_absent_port_defaults(caplog):
    reg = _bridge_view([(101, 2)])
    assert link_state_of(AgentAddress("10.9.9.1"), 999, reg, CREDS) is LinkState.FORWARDING
    assert "not in bridge MIB" in caplog.text


ROUTED = """
devices:
  - {deviceId: R1, managementIp: 10.0.0.1, interfaces: [{name: g0, ifIndex: 1, routed: true}, {name: g1, ifIndex: 2}]}
  - {deviceId: R2, managementIp: 10.0.0.2, interfaces: [{name: g0, ifIndex: 1, routed: true}, {name: g1, ifIndex: 2}]}
links:
  - {a: [R1, g0], b: [R2, g0], stpState: forwarding}
  - {a: [R1, g1], b: [R2, g1]}
"""


def test_routed_link_is_forwarding_with_warning():
    fx = fixture_from_yaml(ROUTED)
    _, _, report = run(fx, "R1")
    states = {(e.a.port, e.b.port): e.state for e in report.graph.edges.values()}
    # g1 is the only bridged link, so it is the tree edge
    assert states == {("g0", "g0"): LinkState.FORWARDING, ("g1", "g1"): LinkState.FORWARDING}
    assert fx.links[0].stp_state == "forwarding"
    assert sum("g0 not in bridge MIB" in w for w in report.warnings) == 2


# -- merge_edge ---------------------------------------------------------------

A, B = IPv4Address("10.0.0.1"), IPv4Address("10.0.0.2")


def _graph():
    g = TopologyGraph(A)
    g.nodes[A] = DeviceNode(A, "A", 1)
    g.nodes[B] = DeviceNode(B, "B", 2)
    return g


def test_merge_reciprocal_reports():
    g = _graph()
    k1 = merge_edge(g, Endpoint(A, "Gi0/1"), Endpoint(B, "Gi0/2"), LinkState.FORWARDING)
    k2 = merge_edge(g, Endpoint(B, "Gi0/2"), Endpoint(A, "Gi0/1"), LinkState.FORWARDING)
    assert k1 == k2 and len(g.edges) == 1
    assert g.edges[k1].reported_by == {"a", "b"}


def test_merge_blocked_takes_precedence():
    g = _graph()
    merge_edge(g, Endpoint(A, "p"), Endpoint(B, "q"), LinkState.FORWARDING)
    (edge,) = g.edges.values()
    assert edge.state is LinkState.FORWARDING and edge.reported_by == {"a"}
    merge_edge(g, Endpoint(B, "q"), Endpoint(A, "p"), LinkState.STP_BLOCKED)
    merge_edge(g, Endpoint(A, "p"), Endpoint(B, "q"), LinkState.FORWARDING)
    assert edge.state is LinkState.STP_BLOCKED


def test_merge_rejects_self_edge():
    g = _graph()
    assert merge_edge(g, Endpoint(A, "p"), Endpoint(A, "q"), LinkState.FORWARDING) is None
    assert g.edges == {} and g.warnings


def test_merge_canonical_order_and_auto_node():
    g = _graph()
    c = IPv4Address("10.0.0.0")
    key = merge_edge(g, Endpoint(A, "p"), Endpoint(c, "z"), LinkState.FORWARDING)
    assert key == (Endpoint(c, "z"), Endpoint(A, "p"))
    assert g.edges[key].reported_by == {"b"}
    assert g.nodes[c].query_status is QueryStatus.NOT_QUERIED and g.nodes[c].level == 2


def test_triangle_blocked_precedence(triangle):
    _, _, report = run(triangle, "A")
    states = Counter(e.state for e in report.graph.edges.values())
    assert states == {LinkState.FORWARDING: 2, LinkState.STP_BLOCKED: 1}
    (blocked,) = [e for e in report.graph.edges.values() if e.state is LinkState.STP_BLOCKED]
    assert {str(blocked.a.ip), str(blocked.b.ip)} == {"10.0.0.2", "10.0.0.3"}
    assert blocked.reported_by == {"a", "b"}


# -- partial knowledge --------------------------------------------------------

UNREACHABLE = """
devices:
  - {deviceId: SW1, managementIp: 10.0.0.1, interfaces: [{name: e1, ifIndex: 1}, {name: e2, ifIndex: 2}]}
  - {deviceId: SW2, managementIp: 10.0.0.2, snmpAgent: false, interfaces: [{name: e1, ifIndex: 1}, {name: e2, ifIndex: 2}]}
  - {deviceId: SW3, managementIp: 10.0.0.3, interfaces: [{name: e1, ifIndex: 1}]}
  - {deviceId: SW4, managementIp: 10.0.0.4, interfaces: [{name: e1, ifIndex: 1}]}
links:
  - {a: [SW1, e1], b: [SW2, e1]}
  - {a: [SW2, e2], b: [SW3, e1]}
  - {a: [SW1, e2], b: [SW4, e1]}
"""


def test_unreachable_neighbor_kept_and_one_sided_edge():
    _, reg, report = run(fixture_from_yaml(UNREACHABLE))
    nodes = report.graph.nodes
    sw2 = nodes[IPv4Address("10.0.0.2")]
    assert sw2.query_status is QueryStatus.UNREACHABLE and sw2.device_id == "SW2"
    assert IPv4Address("10.0.0.3") not in nodes  # only reachable through SW2
    assert report.unreachable == [IPv4Address("10.0.0.2")]
    edge = report.graph.edges[(Endpoint(IPv4Address("10.0.0.1"), "e1"), Endpoint(IPv4Address("10.0.0.2"), "e1"))]
    assert edge.reported_by == {"a"}
    assert report.outcomes[IPv4Address("10.0.0.4")] is QueryStatus.QUERIED


def test_each_device_queried_once(figure1_net):
    reg = figure1_net.registry()
    discover(AgentAddress(ip(1)), reg, CREDS, DiscoveryConfig(parallelism=4))
    cdp_walks = Counter(r.agent for r in reg.log if r.operation == "walk" and r.oid == mib.CDP_CACHE_TABLE)
    assert set(cdp_walks.values()) == {1}
    assert len(cdp_walks) == 6


def test_alias_warning_does_not_merge():
    fx = fixture_from_yaml("""
        devices:
          - {deviceId: SW1, managementIp: 10.0.0.1, interfaces: [{name: e1, ifIndex: 1}, {name: e2, ifIndex: 2}]}
          - {deviceId: SW2, managementIp: 10.0.0.2, interfaces: [{name: e1, ifIndex: 1}]}
          - {deviceId: SW3, managementIp: 10.0.0.3, interfaces: [{name: e1, ifIndex: 1}]}
        links:
          - {a: [SW1, e1], b: [SW2, e1]}
          - {a: [SW1, e2], b: [SW3, e1]}
    """)
    net = SimulatedNetwork(fx)
    # SW3's agent claims the same sysName as SW2
    net.views[IPv4Address("10.0.0.3")][mib.SYS_NAME_0] = SnmpValue.octets("SW2")
    report = discover(AgentAddress("10.0.0.1"), net.registry(), CREDS)
    assert len(report.graph.nodes) == 3
    assert any("'SW2'" in w and "aliases" in w for w in report.warnings)


def test_max_level_cap(figure1_net):
    report = discover(AgentAddress(ip(1)), figure1_net.registry(), CREDS, DiscoveryConfig(max_level=2))
    statuses = {str(i): n.query_status for i, n in report.graph.nodes.items()}
    assert statuses["192.168.10.3"] is QueryStatus.QUERIED
    assert statuses["192.168.10.5"] is QueryStatus.NOT_QUERIED
    assert len(report.steps) == 2


def test_config_invariants():
    with pytest.raises(ValueError):
        DiscoveryConfig(parallelism=0)
    with pytest.raises(ValueError):
        DiscoveryConfig(max_level=-1)


# -- properties ---------------------------------------------------------------

@given(networks())
def test_master_property(fx):
    net, _, report = run(fx)
    nodes, edges = expected_topology(net.fixture, "SW1")
    assert {str(i) for i in report.graph.nodes} == nodes
    assert discovered_edges(report.graph) == edges
    # hosts and hubs never surface
    hosts = {str(h.ip) for h in fx.hosts if h.ip}
    assert not hosts & nodes
    assert not {n.device_id for n in report.graph.nodes.values()} & (fx.host_ids | fx.hub_ids)


@given(networks())
def test_levels_are_bfs_distances(fx):
    _, _, report = run(fx)
    dist = hop_distances(report.graph, report.graph.root_ip)
    for ip_, node in report.graph.nodes.items():
        if node.query_status is QueryStatus.QUERIED:
            assert node.level - 1 == dist[ip_]
    assert sum(n.level == 1 for n in report.graph.nodes.values()) == 1


@given(networks(max_devices=10))
def test_parallelism_does_not_change_result(fx):
    outputs = {to_json(run(fx, parallelism=k)[2], timings=False) for k in (1, 2, 8)}
    assert len(outputs) == 1


def test_udp_backend_discovery_matches(figure1_net):
    views = {AgentAddress(i): v for i, v in figure1_net.views.items()}
    with LoopbackNetwork(views) as udp:
        over_udp = discover(AgentAddress(ip(1)), udp, CREDS)
    simulated = discover(AgentAddress(ip(1)), figure1_net.registry(), CREDS)
    assert to_json(over_udp, timings=False) == to_json(simulated, timings=False)
