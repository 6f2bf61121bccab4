"""Run one or more scenario configs and print each summary table.

Usage: python scripts/run_scenarios.py configs/kernel_comparison.yaml configs/moo.yaml --jobs 4
"""

import argparse
import logging

from hetbo.cli import print_summary, run_scenario
from hetbo.config import load_config


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("configs", nargs="+")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s:%(name)s:%(message)s")
    for path in args.configs:
        manifest = run_scenario(load_config(path), jobs=args.jobs)
        print(print_summary(manifest))
        if manifest.failed:
            print(f"{len(manifest.failed)} runs failed; see {manifest.out_dir}/manifest.json")


if __name__ == "__main__":
    main()
