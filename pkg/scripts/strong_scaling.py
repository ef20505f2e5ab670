"""Simulated strong scaling of the three distributed spMVM modes on one synthetic matrix.

Prints one CSV row per rank count: simulated times, slowest-rank compute and
communication, and task/vector time ratio.
"""

import argparse
import csv
import sys

from pjds.dist.costmodel import MODES, CostParams, strong_scaling
from pjds.matrix import generate, parse_generator


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--generate-spec", default="uniform:5,25")
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--max-ranks", type=int, default=32)
    ap.add_argument("--balance", choices=["rows", "nnz"], default="rows")
    ap.add_argument("--link-bandwidth", type=float, default=CostParams.link_bandwidth)
    ap.add_argument("--link-latency", type=float, default=CostParams.link_latency)
    args = ap.parse_args(argv)

    m = generate(parse_generator(args.generate_spec, args.rows, args.seed))
    cost = CostParams(link_bandwidth=args.link_bandwidth, link_latency=args.link_latency)
    points = strong_scaling(m, range(1, args.max_ranks + 1), cost, args.balance)

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["ranks", *MODES, "compute_s", "comm_s", "task_over_vector"])
    for p in points:
        w.writerow([p.n_ranks, *(f"{p.times[mode]:.6e}" for mode in MODES),
                    f"{p.compute:.6e}", f"{p.comm:.6e}", f"{p.task_vs_vector:.6f}"])


if __name__ == "__main__":
    main()
