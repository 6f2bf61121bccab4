"""Paired comparison of best losses between two algorithms/variants of a finished scenario.

Usage: python scripts/compare_runs.py results/kernel_comparison Matern52/bo baseline/random
"""

import argparse
import json
import statistics
from pathlib import Path

from scipy.stats import wilcoxon


def best_losses(manifest: dict, group: str) -> dict[int, float]:
    variant, algorithm = group.split("/")
    return {
        r["seed"]: r["best_value"]
        for r in manifest["runs"]
        if r["variant"] == variant and r["algorithm"] == algorithm and r["status"] == "ok"
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir")
    parser.add_argument("first", help="variant/algorithm, e.g. Matern52/bo")
    parser.add_argument("second", help="variant/algorithm, e.g. baseline/random")
    args = parser.parse_args()
    manifest = json.loads((Path(args.out_dir) / "manifest.json").read_text())
    a, b = best_losses(manifest, args.first), best_losses(manifest, args.second)
    seeds = sorted(set(a) & set(b))
    if not seeds:
        raise SystemExit("no seeds in common")
    xa, xb = [a[s] for s in seeds], [b[s] for s in seeds]
    print(f"seeds: {seeds}")
    print(f"median {args.first}: {statistics.median(xa):.5f}")
    print(f"median {args.second}: {statistics.median(xb):.5f}")
    wins = sum(x < y for x, y in zip(xa, xb))
    print(f"{args.first} lower on {wins}/{len(seeds)} seeds")
    if len(seeds) > 1 and any(x != y for x, y in zip(xa, xb)):
        print(f"Wilcoxon signed-rank (one-sided, first < second): p = {wilcoxon(xa, xb, alternative='less').pvalue:.4g}")


if __name__ == "__main__":
    main()
