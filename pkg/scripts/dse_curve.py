"""Maximum performance against SRAM budget, found by simulation and by the
estimator, for AlexNet conv3 over the desk space.

    python scripts/dse_curve.py [--budgets 12] [--out results/dse]
"""

import argparse
from pathlib import Path

from accsim.dse import budget_grid, desk_space, enumerate_space, evaluate_points, frontier, frontier_csv
from accsim.workload import alexnet_conv3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--budgets", type=int, default=12)
    ap.add_argument("--out", default="results/dse")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    layer = alexnet_conv3()
    points = evaluate_points(layer, enumerate_space(desk_space(), layer), ("simulate", "estimate"), args.workers)
    budgets = budget_grid(points, n=args.budgets)
    sim = frontier(points, budgets, "simulate")
    est = frontier(points, budgets, "estimate")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "frontier_simulate.csv").write_text(frontier_csv(sim))
    (out / "frontier_estimate.csv").write_text(frontier_csv(est))
    perf_of = {p.tile: p.perf_simulated for p in points}
    print(f"{'budget':>8} {'sim best':>9}  tile{'':22s} {'est pick (simulated)':>21}")
    est_by_budget = {b: t for b, _, t in est}
    for b, perf, tile in sim:
        pick = est_by_budget.get(b)
        picked = f"{perf_of[pick]:.3f}" if pick is not None else "-"
        print(f"{b:8d} {perf:9.3f}  {str(tile):26s} {picked:>21}")


if __name__ == "__main__":
    main()
