"""Print the BFS crawl of the shipped figure1 network, step by step."""

import argparse

from cdpmap import AgentAddress, Credentials, DiscoveryConfig, SimulatedNetwork, discover
from cdpmap.simulator import load_fixture, shipped_fixture


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--root", default="SW1")
    parser.add_argument("--parallelism", type=int, default=8)
    args = parser.parse_args()

    net = SimulatedNetwork(load_fixture(shipped_fixture("figure1")))
    root = AgentAddress(net.fixture.device(args.root).management_ip)
    report = discover(root, net.registry(), Credentials(), DiscoveryConfig(parallelism=args.parallelism))

    print(f"{'step':<5} {'queried':<40} {'neighbors':<40} new")
    for i, step in enumerate(report.steps, start=1):
        fmt = lambda ips: ", ".join(map(str, ips)) or "-"
        print(f"{i:<5} {fmt(step.queried):<40} {fmt(step.neighbors):<40} {fmt(step.new)}")
    print()
    for node in report.graph.sorted_nodes():
        print(f"{node.device_id:<6} {node.management_ip}  level {node.level}")


if __name__ == "__main__":
    main()
