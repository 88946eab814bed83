"""FAVOR+ approximation error against exact softmax attention as the feature count grows."""
import argparse

from arena.metrics import favor_error_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--features", type=int, nargs="+", default=[16, 64, 256, 512, 1024])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--d", type=int, default=32)
    args = ap.parse_args()
    errs = favor_error_sweep(tuple(args.features), args.seeds, args.n, args.d)
    print(f"{'m':>6}  median mean_abs")
    for m, e in errs.items():
        print(f"{m:>6}  {e:.5f}")


if __name__ == "__main__":
    main()
