"""Row-length thresholds at which PCIe transfers stop dominating, over a range of bandwidth ratios."""

import argparse

from pjds.perfmodel import RECIPROCAL, NoHeadroomError, threshold_lower, threshold_upper


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ratios", type=float, nargs="+", default=[2, 5, 10, 15, 20, 30, 50])
    ap.add_argument("--precision", choices=["DP", "SP"], default="DP")
    ap.add_argument("--split", action="store_true")
    args = ap.parse_args(argv)

    print(f"{'B_gpu/B_pci':>12}{'alpha':>12}{'upper (50%)':>14}{'lower (10%)':>14}")
    for ratio in args.ratios:
        for alpha in (1.0, RECIPROCAL):
            try:
                up = f"{threshold_upper(ratio, alpha, args.precision, args.split):.2f}"
            except NoHeadroomError:
                up = "n/a"
            low = threshold_lower(ratio, alpha, args.precision, args.split)
            print(f"{ratio:>12g}{str(alpha):>12}{up:>14}{low:>14.2f}")


if __name__ == "__main__":
    main()
