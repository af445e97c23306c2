"""Serializers for discovered topologies: JSON document, Graphviz DOT, text table."""

from __future__ import annotations

import json
from importlib import resources
from typing import Any

from cdpmap.discovery import DiscoveryReport, LinkState, TopologyGraph

SCHEMA_VERSION = "1"


def load_schema() -> dict:
    return json.loads((resources.files("cdpmap") / "topology.schema.json").read_text())


def topology_document(report: DiscoveryReport, *, timings: bool = True) -> dict[str, Any]:
    """The report as a plain dict. ``timings=False`` zeroes the two duration fields."""
    graph = report.graph
    edges = graph.sorted_edges()
    return {
        "schemaVersion": SCHEMA_VERSION,
        "root": str(graph.root_ip),
        "nodes": [
            {"ip": str(n.management_ip), "deviceId": n.device_id, "level": n.level,
             "queryStatus": n.query_status.value}
            for n in graph.sorted_nodes()
        ],
        "edges": [
            {"a": {"ip": str(e.a.ip), "port": e.a.port},
             "b": {"ip": str(e.b.ip), "port": e.b.port},
             "state": e.state.value,
             "reportedBy": sorted(e.reported_by)}
            for e in edges
        ],
        "stats": {
            "nodeCount": len(graph.nodes),
            "edgeCount": len(edges),
            "blockedCount": sum(e.state is LinkState.STP_BLOCKED for e in edges),
            "unreachableCount": len(report.unreachable),
            "retrievalMs": round(report.retrieval_seconds * 1000) if timings else 0,
            "assemblyMs": round(report.assembly_seconds * 1000) if timings else 0,
        },
    }


def to_json(report: DiscoveryReport, *, timings: bool = True) -> str:
    return json.dumps(topology_document(report, timings=timings), indent=2) + "\n"


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def to_dot(graph: TopologyGraph) -> str:
    lines = ["graph topology {", "  node [shape=box];"]
    for n in graph.sorted_nodes():
        label = f"{n.device_id}\n{n.management_ip} (L{n.level})"
        lines.append(f"  {_quote(str(n.management_ip))} [label={_quote(label)}];")
    for e in graph.sorted_edges():
        attrs = [f"taillabel={_quote(e.a.port)}", f"headlabel={_quote(e.b.port)}"]
        if e.state is LinkState.STP_BLOCKED:
            attrs += ["style=dashed", 'label="blocked"']
        else:
            attrs.append("style=solid")
        lines.append(f"  {_quote(str(e.a.ip))} -- {_quote(str(e.b.ip))} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_table(report: DiscoveryReport) -> str:
    """Human-readable crawl report: BFS steps, devices, links, totals."""
    doc = topology_document(report)
    out = [f"Topology discovery from {doc['root']}", "", "Step  Queried / Neighbors"]
    for s in report.steps:
        out.append(f"{s.level:<5} {' '.join(map(str, s.queried))}")
        out.append(f"{'':5} -> {' '.join(map(str, s.neighbors)) or '(none)'}")
    out += ["", f"{'IP':<16} {'Device':<20} {'Level':>5}  Status"]
    for n in doc["nodes"]:
        out.append(f"{n['ip']:<16} {n['deviceId']:<20} {n['level']:>5}  {n['queryStatus']}")
    out += ["", f"{'A':<34} {'B':<34} State"]
    for e in doc["edges"]:
        a = f"{e['a']['ip']} {e['a']['port']}"
        b = f"{e['b']['ip']} {e['b']['port']}"
        out.append(f"{a:<34} {b:<34} {e['state']}")
    st = doc["stats"]
    out += ["", f"{st['nodeCount']} devices, {st['edgeCount']} links ({st['blockedCount']} blocked), "
                f"{st['unreachableCount']} unreachable; retrieval {st['retrievalMs']} ms, "
                f"assembly {st['assemblyMs']} ms"]
    if report.warnings:
        out += ["", "Warnings:"] + [f"  {w}" for w in report.warnings]
    return "\n".join(out) + "\n"
