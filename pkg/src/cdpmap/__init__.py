"""Layer-2 topology discovery by crawling CDP neighbor caches over SNMP."""

from cdpmap.discovery import (
    DeviceNode,
    DiscoveryConfig,
    DiscoveryReport,
    Endpoint,
    LinkState,
    QueryStatus,
    RootUnreachableError,
    TopologyEdge,
    TopologyGraph,
    discover,
    fetch_neighbors,
    link_state_of,
    merge_edge,
)
from cdpmap.mib import CdpNeighborEntry, Oid, SnmpValue, VarBind, compare_oids, decode_cdp_cache_rows, parse_oid
from cdpmap.simulator import (
    NetworkFixture,
    SimulatedNetwork,
    build_agent_views,
    compute_stp_states,
    generate_random_fixture,
    load_fixture,
)
from cdpmap.transport import (
    AgentAddress,
    Credentials,
    SimulatedRegistry,
    TransportConfig,
    UdpTransport,
    UnreachableError,
    register_simulated_agent,
)

__version__ = "0.1.0"
