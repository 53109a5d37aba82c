"""DMA intervals of one processing pass: simulated against estimated.

    python scripts/pass_intervals.py [--tile 1,2,64,6,13] [--pass N]
"""

import argparse

from accsim.estimator import estimate
from accsim.simulator import simulate
from accsim.workload import TileConfig, alexnet_conv3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tile", default="1,2,64,6,13")
    ap.add_argument("--pass", dest="k", type=int, default=None, help="pass index (default: first store pass)")
    args = ap.parse_args()
    layer = alexnet_conv3()
    tile = TileConfig(*[int(x) for x in args.tile.split(",")])
    sim = simulate(layer, tile)
    est = estimate(layer, tile, keep_intervals=True)
    k = args.k
    if k is None:
        k = next(t.pass_index for t in sim.per_pass if any(len(iv.active_dmacs) == 3 for iv in t.intervals))
    t = sim.per_pass[k]
    print(f"pass {k}: simulated comm {t.comm_cycles} compute {t.compute_cycles}; "
          f"estimated comm {est.per_pass_comm[k]:.0f}")
    print("simulated intervals:")
    for iv in t.intervals:
        if iv.end > iv.start:
            act = ",".join(sorted(d.value for d in iv.active_dmacs)) or "-"
            print(f"  {act:12s} {iv.end - iv.start:6d} cycles  {iv.bandwidth:.3f} elem/cycle")
    print("estimated intervals:")
    for iv in est.intervals[k]:
        print(f"  {','.join(iv.active):12s} {iv.duration:8.1f} cycles  U={tuple(round(u, 3) for u in iv.U)} "
              f"{iv.regime}")
    print(f"layer: simulated {sim.total_cycles} cycles, estimated {est.total_cycles:.0f} "
          f"({est.total_cycles / sim.total_cycles - 1:+.2%})")


if __name__ == "__main__":
    main()
