"""Shared MAC array for two layers: constrained tiling (tile = unroll) against
unconstrained tiling (tile a multiple of the unroll), over SRAM budgets.

    python scripts/multilayer.py [--layers alexnet-conv3 alexnet-conv5]
"""

import argparse

from accsim.dse import desk_space, optimize_multilayer
from accsim.estimator import estimate
from accsim.workload import preset

UNROLL = [(16, 2), (8, 4), (32, 2), (16, 4), (8, 8), (32, 4), (16, 8), (64, 2)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--layers", nargs="+", default=["alexnet-conv3", "alexnet-conv5"])
    ap.add_argument("--budgets", type=int, nargs="+", default=[6000, 12000, 24000, 48000, 96000])
    args = ap.parse_args()
    layers = [preset(n) for n in args.layers]
    cache = {}

    def cycles(layer, tile):
        k = (layer.name, tile.key())
        if k not in cache:
            cache[k] = estimate(layer, tile).total_cycles
        return cache[k]

    spaces = [desk_space()] * len(layers)
    for b in args.budgets:
        con = optimize_multilayer(layers, UNROLL, spaces, b, "constrained", cycles)
        unc = optimize_multilayer(layers, UNROLL, spaces, b, "unconstrained", cycles)
        print(f"budget {b}: constrained {con.performance:.3f} (unroll {con.unroll}), "
              f"unconstrained {unc.performance:.3f} (unroll {unc.unroll}), gain {unc.performance / con.performance - 1:+.1%}")
        for layer, t in zip(layers, unc.tiles):
            print(f"    {layer.name}: {t}")


if __name__ == "__main__":
    main()
