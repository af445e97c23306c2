"""Write a random connected fixture to a YAML file (or stdout)."""

import argparse
import sys

from cdpmap.simulator import dump_fixture, generate_random_fixture


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--devices", type=int, default=20)
    parser.add_argument("--extra-links", type=int, default=5)
    parser.add_argument("-o", "--output")
    args = parser.parse_args()

    text = dump_fixture(generate_random_fixture(args.seed, args.devices, args.extra_links))
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
