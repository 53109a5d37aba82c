"""Command line: accsim {simulate, estimate, dse, compare, trace}.

Exit codes: 0 success, 2 configuration error, 3 no feasible design point.
The output directory comes from the config (or --out) unless ACCSIM_OUT is set.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from pathlib import Path

from accsim.config import SPACES, ConfigFileError, RunConfig
from accsim.dse import (EmptySpace, Infeasible, budget_grid, enumerate_space, evaluate_points, frontier_csv,
                        hybrid_optimize, optimize, optimize_multilayer, points_csv)
from accsim.estimator import CONVENTIONAL, SCALED_PER_TYPE, SCALED_UNIFORM, estimate, estimate_conventional
from accsim.simulator import ConfigError, emit_trace, simulate
from accsim.workload import TileConfig

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3
OUT_ENV = "ACCSIM_OUT"


class UsageError(ValueError):
    pass


def _tile(text: str) -> TileConfig:
    try:
        vals = [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad tile {text!r}; expected TB,TC,TM,TE,TF[,UM,UC]") from None
    if len(vals) not in (5, 7):
        raise UsageError(f"bad tile {text!r}; expected TB,TC,TM,TE,TF[,UM,UC]")
    return TileConfig(*vals)


def _scale(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad scale {text!r}; expected three numbers") from None
    if len(vals) != 3 or any(v <= 0 for v in vals):
        raise UsageError("scale needs three positive cycles-per-element values")
    return vals


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.layer:
        cfg.layers = list(args.layer)
    if getattr(args, "tile", None):
        cfg.tile = _tile(args.tile)
    if getattr(args, "space", None):
        cfg.space = SPACES[args.space]()
    if getattr(args, "budget", None) is not None:
        cfg.sram_budget = args.budget
    if args.out:
        cfg.output_dir = args.out
    if getattr(args, "trace", None):
        cfg.traces = list(args.trace)
    if getattr(args, "model", None):
        cfg.model = args.model
    if getattr(args, "scale", None):
        cfg.scale = _scale(args.scale)
    if getattr(args, "evaluator", None):
        cfg.evaluator = args.evaluator
    if getattr(args, "top_fraction", None) is not None:
        cfg.top_fraction = args.top_fraction
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    return cfg


def _outdir(cfg: RunConfig) -> Path:
    d = Path(os.environ.get(OUT_ENV) or cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _one_layer(cfg: RunConfig):
    layers = cfg.layer_shapes()
    if len(layers) != 1:
        raise UsageError("this command takes exactly one layer")
    return layers[0]


def _need_tile(cfg: RunConfig) -> TileConfig:
    if cfg.tile is None:
        raise UsageError("a tile is required (--tile or 'tile' in the config)")
    return cfg.tile


def _need_space(cfg: RunConfig):
    if cfg.space is None:
        raise UsageError("a design space is required (--space or 'space' in the config)")
    return cfg.space


def cmd_simulate(cfg: RunConfig) -> int:
    layer, tile = _one_layer(cfg), _need_tile(cfg)
    traces = set(cfg.traces)
    bad = traces - {"dram", "bus", "passes"}
    if bad:
        raise UsageError(f"unknown trace kind(s): {', '.join(sorted(bad))}")
    rep = simulate(layer, tile, cfg.bus, cfg.dram, cfg.accel, trace_dram="dram" in traces,
                   trace_bus="bus" in traces, sram_budget=cfg.sram_budget, strict=cfg.sram_budget is not None)
    out = _outdir(cfg)
    (out / "simulate.json").write_text(rep.to_json())
    for kind in sorted(traces):
        emit_trace(rep, kind, out / f"trace_{kind}.csv")
    print(f"total_cycles={rep.total_cycles} performance={rep.performance:.4f} regime={rep.regime}")
    return EXIT_OK


def _estimate_report(cfg: RunConfig, layer, tile):
    if cfg.model == "proposed":
        return estimate(layer, tile, cfg.bus, cfg.dram, cfg.accel)
    if cfg.model == "conventional":
        return estimate_conventional(layer, tile, cfg.scale or CONVENTIONAL, cfg.accel)
    if cfg.model == "scaled":
        return estimate_conventional(layer, tile, cfg.scale or SCALED_UNIFORM, cfg.accel)
    raise UsageError(f"unknown model {cfg.model!r}")


def cmd_estimate(cfg: RunConfig) -> int:
    layer, tile = _one_layer(cfg), _need_tile(cfg)
    rep = _estimate_report(cfg, layer, tile)
    out = _outdir(cfg)
    (out / f"estimate_{cfg.model}.json").write_text(rep.to_json())
    print(f"model={cfg.model} total_cycles={rep.total_cycles:.1f} performance={rep.performance:.4f} "
          f"regime={rep.regime}")
    return EXIT_OK


def cmd_dse(cfg: RunConfig, multilayer: bool = False, unconstrained: bool = False) -> int:
    space = _need_space(cfg)
    out = _outdir(cfg)
    if multilayer:
        layers = cfg.layer_shapes()
        if cfg.sram_budget is None:
            raise UsageError("multi-layer search needs an SRAM budget")
        unroll = cfg.unroll_set or [[tm, tc] for tc in space.tc_set for tm in space.tm_set
                                    if space.mac_budget is None or tc * tm <= space.mac_budget]
        res = optimize_multilayer(layers, [tuple(u) for u in unroll], [space] * len(layers), cfg.sram_budget,
                                  "unconstrained" if unconstrained else "constrained")
        (out / "dse_multilayer.json").write_text(json.dumps(res.to_dict(), indent=1, sort_keys=True))
        tiles = "; ".join(str(t) for t in res.tiles)
        print(f"mode={res.mode} unroll={res.unroll} performance={res.performance:.4f} tiles: {tiles}")
        return EXIT_OK
    layer = _one_layer(cfg)
    tiles = list(enumerate_space(space, layer))
    budget = cfg.sram_budget if cfg.sram_budget is not None else float("inf")
    if cfg.top_fraction is not None:
        est = cfg.evaluator if cfg.evaluator != "simulate" else "estimate"
        points = evaluate_points(layer, tiles, (est,), cfg.workers)
        best = hybrid_optimize(space, layer, budget, cfg.top_fraction, est, cfg.workers, points)
        simulated = sum(1 for p in points if p.perf_simulated is not None)
        (out / "dse_points.csv").write_text(points_csv(points))
        print(f"best {best.tile} simulated_performance={best.perf_simulated:.4f} simulated_points={simulated}")
        return EXIT_OK
    points = evaluate_points(layer, tiles, (cfg.evaluator,), cfg.workers)
    top = None if cfg.sram_budget is None else cfg.sram_budget
    res = optimize(space, layer, budget, cfg.evaluator, budget_grid(points, top=top), cfg.workers, points)
    (out / "dse_points.csv").write_text(points_csv(points))
    (out / "dse_frontier.csv").write_text(frontier_csv(res.frontier))
    (out / "dse.json").write_text(res.to_json())
    print(f"points={len(points)} best {res.best.tile} footprint={res.best.footprint} "
          f"performance={res.best.perf(cfg.evaluator):.4f}")
    return EXIT_OK


MODELS = ("estimate", "conventional", "scaled", "scaled-per-type")


def error_table(points) -> dict:
    """Absolute relative error of each model's performance against the simulator."""
    table = {}
    for m in MODELS:
        errs = sorted(abs(p.perf(m) / p.perf_simulated - 1) for p in points if p.perf(m) is not None)
        if not errs:
            continue
        q = statistics.quantiles(errs, n=10) if len(errs) > 1 else [errs[0]] * 9
        table["proposed" if m == "estimate" else m] = {
            "points": len(errs), "mean": statistics.fmean(errs), "median": statistics.median(errs),
            "p90": q[8], "max": errs[-1]}
    return table


def cmd_compare(cfg: RunConfig) -> int:
    space = _need_space(cfg)
    layer = _one_layer(cfg)
    points = evaluate_points(layer, enumerate_space(space, layer), ("simulate",) + MODELS, cfg.workers)
    table = error_table(points)
    out = _outdir(cfg)
    (out / "compare.json").write_text(json.dumps(table, indent=1, sort_keys=True))
    (out / "compare_points.csv").write_text(points_csv(points))
    for name, row in table.items():
        print(f"{name:16s} mean={row['mean']:.4f} median={row['median']:.4f} p90={row['p90']:.4f} "
              f"max={row['max']:.4f}")
    return EXIT_OK


def cmd_trace(cfg: RunConfig, kind: str) -> int:
    layer, tile = _one_layer(cfg), _need_tile(cfg)
    rep = simulate(layer, tile, cfg.bus, cfg.dram, cfg.accel, trace_dram=kind == "dram", trace_bus=kind == "bus",
                   engine="event")
    path = emit_trace(rep, kind, _outdir(cfg) / f"trace_{kind}.csv")
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="accsim", description="CNN accelerator DRAM/bus simulator and estimator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--layer", action="append", help="layer preset (repeat for several layers)")
    common.add_argument("--out", help="output directory")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="cycle-level simulation of one tile")
    p.add_argument("--tile", help="TB,TC,TM,TE,TF[,UM,UC]")
    p.add_argument("--trace", action="append", choices=("dram", "bus", "passes"))
    p.add_argument("--budget", type=int, help="SRAM budget in elements (enforced)")

    p = sub.add_parser("estimate", parents=[common], help="analytic estimate of one tile")
    p.add_argument("--tile")
    p.add_argument("--model", help="proposed, conventional or scaled")
    p.add_argument("--scale", help="cycles per element for IFM,W,OFM")

    p = sub.add_parser("dse", parents=[common], help="design-space exploration")
    p.add_argument("--space", choices=sorted(SPACES))
    p.add_argument("--budget", type=int)
    p.add_argument("--evaluator", choices=("simulate",) + MODELS)
    p.add_argument("--top-fraction", type=float)
    p.add_argument("--multilayer", action="store_true")
    p.add_argument("--unconstrained", action="store_true")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("compare", parents=[common], help="estimation error of every model over a space")
    p.add_argument("--space", choices=sorted(SPACES))
    p.add_argument("--workers", type=int)

    p = sub.add_parser("trace", parents=[common], help="write one trace as CSV")
    p.add_argument("--tile")
    p.add_argument("--kind", choices=("dram", "bus", "passes"), default="dram")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg)
        if args.command == "dse":
            return cmd_dse(cfg, args.multilayer, args.unconstrained)
        if args.command == "compare":
            return cmd_compare(cfg)
        return cmd_trace(cfg, args.kind)
    except Infeasible as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, ConfigFileError, ConfigError, EmptySpace, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
