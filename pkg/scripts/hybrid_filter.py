"""Hybrid search: rank by an estimator, simulate only the top fraction.

Prints the share of the exhaustive simulated optimum recovered by each
estimator for several fractions and budgets.

    python scripts/hybrid_filter.py [--fractions 0.005 0.01 0.05 0.1]
"""

import argparse

from accsim.dse import budget_grid, desk_space, enumerate_space, evaluate_points, hybrid_optimize
from accsim.workload import alexnet_conv3

ESTIMATORS = ("estimate", "conventional", "scaled")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.005, 0.01, 0.05, 0.1])
    ap.add_argument("--budgets", type=int, default=6)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    layer = alexnet_conv3()
    space = desk_space()
    points = evaluate_points(layer, enumerate_space(space, layer), ("simulate",) + ESTIMATORS, args.workers)
    print(f"{'budget':>8} {'fraction':>8} " + " ".join(f"{e:>12}" for e in ESTIMATORS))
    for b in budget_grid(points, n=args.budgets)[1:]:
        best = max(p.perf_simulated for p in points if p.footprint <= b)
        for f in args.fractions:
            got = [hybrid_optimize(space, layer, b, f, e, points=points).perf_simulated / best for e in ESTIMATORS]
            print(f"{b:8d} {f:8.3f} " + " ".join(f"{g:12.4f}" for g in got))


if __name__ == "__main__":
    main()
