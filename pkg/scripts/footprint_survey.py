"""Storage of ELLPACK, ELLPACK-R and pJDS across synthetic row-length shapes.

The shapes loosely mimic three application classes: long rows in a narrow
band around the maximum, short nearly constant rows, and short rows with a
long tail. Sizes are scaled down so the survey runs in seconds.
"""

import argparse

from pjds.formats import build_ellpack, build_ellpack_r, build_pjds, footprint
from pjds.matrix import Adversarial, Clustered, Constant, GeneratorSpec, Uniform, generate, histogram

SHAPES = {
    "long-rows-clustered": Clustered(0.8, 144, 20, 143),
    "short-rows-uniform": Uniform(5, 9),
    "short-rows-long-tail": Clustered(0.95, 15, 1, 14),
    "constant": Constant(27),
    "adversarial": Adversarial(),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=8192)
    ap.add_argument("--block-rows", type=int, default=32)
    ap.add_argument("--precision", choices=["DP", "SP"], default="DP")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    header = f"{'shape':<22}{'mean':>8}{'max':>6}  {'format':<10}{'stored':>12}{'MB':>10}{'overhead':>10}{'vs ELL':>9}"
    print(header)
    for name, dist in SHAPES.items():
        m = generate(GeneratorSpec(args.rows, dist, args.seed))
        h = histogram(m)
        for build in (build_ellpack, build_ellpack_r, build_pjds):
            f = footprint(build(m, args.block_rows), args.precision)
            print(f"{name:<22}{h.mean_len:>8.2f}{h.max_len:>6}  {f.format:<10}{f.stored_entries:>12}"
                  f"{f.bytes_total / 2**20:>10.2f}{f.padding_overhead_fraction:>10.4f}"
                  f"{f.data_reduction_vs_ellpack:>9.4f}")


if __name__ == "__main__":
    main()
