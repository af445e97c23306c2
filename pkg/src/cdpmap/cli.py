"""``cdpmap`` command line.

    cdpmap sim  --fixture figure1 --root SW1 --format json
    cdpmap real --root 192.168.10.1 --community public --format dot -o topo.dot

Exit codes: 0 success, 2 bad flags, 3 fixture/validation error,
4 root device unreachable.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from ipaddress import IPv4Address
from pathlib import Path

from cdpmap.discovery import DiscoveryConfig, RootUnreachableError, discover
from cdpmap.export import to_dot, to_json, to_table
from cdpmap.simulator import FixtureError, SimulatedNetwork, load_fixture, shipped_fixture
from cdpmap.transport import AgentAddress, Credentials, TransportConfig, UdpTransport

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FIXTURE = 3
EXIT_ROOT_UNREACHABLE = 4

log = logging.getLogger("cdpmap")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _ipv4(text: str) -> IPv4Address:
    try:
        return IPv4Address(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an IPv4 address: {text}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--community", help="SNMP v2c community (fallback: $CDPMAP_COMMUNITY, then 'public')")
    common.add_argument("--timeout-ms", type=_positive, default=2000)
    common.add_argument("--retries", type=_non_negative, default=1)
    common.add_argument("--max-repetitions", type=_positive, default=20)
    common.add_argument("--parallelism", type=_positive, default=8)
    common.add_argument("--max-level", type=_non_negative, default=0, help="stop below this BFS level (0 = unlimited)")
    common.add_argument("--format", choices=("dot", "json", "table"), default="table")
    common.add_argument("-o", "--output", help="write here instead of standard output")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cdpmap", description="Layer-2 topology discovery from CDP neighbor caches.")
    sub = parser.add_subparsers(dest="mode", required=True, metavar="{real,sim}")
    real = sub.add_parser("real", parents=[common], help="crawl live devices over SNMP v2c/UDP")
    real.add_argument("--root", type=_ipv4, required=True, help="management IP of the root device")
    real.add_argument("--port", type=_positive, default=161, help="agent UDP port")
    sim = sub.add_parser("sim", parents=[common], help="crawl a simulated network built from a fixture")
    sim.add_argument("--fixture", required=True, help="fixture file, or the name of a shipped fixture (figure1)")
    sim.add_argument("--root", required=True, help="deviceId or management IP of the root device")
    return parser


def _resolve_fixture_path(text: str) -> Path:
    path = Path(text)
    if path.exists() or path.suffix not in ("", ".yaml"):
        return path
    shipped = shipped_fixture(path.name)
    return shipped if shipped.exists() else path


def resolve_community(flag: str | None) -> str:
    return flag or os.environ.get("CDPMAP_COMMUNITY") or "public"


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="cdpmap: %(levelname)s: %(message)s")
    community = resolve_community(args.community)
    cfg = DiscoveryConfig(TransportConfig(args.timeout_ms, args.retries, args.max_repetitions),
                          parallelism=args.parallelism, max_level=args.max_level)

    if args.mode == "sim":
        try:
            net = SimulatedNetwork(load_fixture(_resolve_fixture_path(args.fixture)))
            try:
                device = net.fixture.device_by_ip(args.root)
            except (KeyError, ValueError):
                try:
                    device = net.fixture.device(args.root)
                except KeyError:
                    raise FixtureError(args.fixture, f"no device {args.root!r} to use as root") from None
        except FixtureError as exc:
            print(f"cdpmap: fixture error: {exc}", file=sys.stderr)
            return EXIT_FIXTURE
        root = AgentAddress(device.management_ip)
        transport = net.registry()
    else:
        root = AgentAddress(args.root, args.port)
        transport = UdpTransport()

    try:
        report = discover(root, transport, Credentials(community), cfg)
    except RootUnreachableError as exc:
        print(f"cdpmap: {exc}", file=sys.stderr)
        return EXIT_ROOT_UNREACHABLE

    for ip in report.unreachable:
        print(f"cdpmap: warning: {ip} unreachable", file=sys.stderr)

    if args.format == "json":
        text = to_json(report)
    elif args.format == "dot":
        text = to_dot(report.graph)
    else:
        text = to_table(report)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
