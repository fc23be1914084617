"""Exact-zero rate of the cross-validated logistic lasso, null vs strong signal."""

import argparse

from hdproj.simulation import default_workers, degeneracy_demo


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=20240006)
    ap.add_argument("--n", type=int, default=500, help="per-group size for the f1-alternative run")
    ap.add_argument("--workers", type=int, default=default_workers())
    args = ap.parse_args(argv)

    null = degeneracy_demo(args.reps, args.seed, "null", workers=args.workers)
    alt = degeneracy_demo(args.reps, args.seed, "f1-alternative", args.n, workers=args.workers)
    print(f"null (appA-global, 100 vs 50): exact-zero fraction {null:.3f}")
    print(f"f1-alternative (n={args.n}):      exact-zero fraction {alt:.3f}")


if __name__ == "__main__":
    main()
