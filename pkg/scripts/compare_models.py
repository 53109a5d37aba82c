"""Estimation error of the proposed, conventional and scaled models over the
desk space of AlexNet conv3, against the cycle-level simulator.

    python scripts/compare_models.py [--out results/compare] [--workers N]
"""

import argparse
import json
from pathlib import Path

from accsim.cli import MODELS, error_table
from accsim.dse import desk_space, enumerate_space, evaluate_points, points_csv
from accsim.workload import alexnet_conv3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/compare")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    layer = alexnet_conv3()
    points = evaluate_points(layer, enumerate_space(desk_space(), layer), ("simulate",) + MODELS, args.workers)
    table = error_table(points)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "points.csv").write_text(points_csv(points))
    (out / "errors.json").write_text(json.dumps(table, indent=1, sort_keys=True))
    print(f"{len(points)} points")
    for name, row in table.items():
        print(f"{name:16s} mean={row['mean']:.4f} median={row['median']:.4f} p90={row['p90']:.4f} "
              f"max={row['max']:.4f}")
    by_regime = {}
    for p in points:
        by_regime.setdefault(p.regime, []).append(abs(p.perf_estimate / p.perf_simulated - 1))
    for regime, errs in sorted(by_regime.items()):
        print(f"proposed, {regime}: {len(errs)} points, mean error {sum(errs) / len(errs):.4f}")


if __name__ == "__main__":
    main()
