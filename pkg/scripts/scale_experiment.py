"""Time discovery over random simulated networks of growing size.

Retrieval (all SNMP walks) and assembly (graph merging) are reported
separately, averaged over several seeds per size.
"""

import argparse
import statistics
import time

from cdpmap import AgentAddress, Credentials, DiscoveryConfig, SimulatedNetwork, discover, generate_random_fixture


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--sizes", type=int, nargs="+", default=[10, 25, 50, 92, 200, 400])
    parser.add_argument("--extra-ratio", type=float, default=0.2, help="extra links per device")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--parallelism", type=int, default=8)
    args = parser.parse_args()

    print(f"{'devices':>8} {'links':>6} {'blocked':>8} {'retrieval ms':>13} {'assembly ms':>12} {'wall ms':>9}")
    for n in args.sizes:
        rows = []
        for seed in range(args.seeds):
            fx = generate_random_fixture(seed, n, int(n * args.extra_ratio))
            start = time.perf_counter()
            net = SimulatedNetwork(fx)
            report = discover(AgentAddress(fx.devices[0].management_ip), net.registry(), Credentials(),
                              DiscoveryConfig(parallelism=args.parallelism))
            wall = time.perf_counter() - start
            blocked = sum(e.state.value == "stp-blocked" for e in report.graph.edges.values())
            rows.append((len(report.graph.edges), blocked, report.retrieval_seconds, report.assembly_seconds, wall))
        mean = lambda i: statistics.mean(r[i] for r in rows)
        print(f"{n:>8} {mean(0):>6.0f} {mean(1):>8.1f} {mean(2) * 1e3:>13.1f} {mean(3) * 1e3:>12.2f} "
              f"{mean(4) * 1e3:>9.1f}")


if __name__ == "__main__":
    main()
