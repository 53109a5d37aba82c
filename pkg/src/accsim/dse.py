"""Design-space exploration over tile sizes.

Points are evaluated independently (optionally in worker processes) and
reduced with deterministic keys, so results do not depend on the worker
count. Performance is MAC operations per cycle.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from math import ceil, exp, log
from typing import Callable, Iterable, Iterator, Optional, Sequence

from accsim.estimator import SCALED_PER_TYPE, SCALED_UNIFORM, estimate, estimate_conventional
from accsim.workload import LayerShape, TileConfig, buffer_footprint


class EmptySpace(ValueError):
    pass


class Infeasible(ValueError):
    pass


@dataclass(frozen=True)
class DesignSpace:
    tb_set: tuple = (1,)
    tc_set: tuple = (1,)
    tm_set: tuple = (1,)
    te_set: tuple = (1,)
    tf_set: tuple = (1,)
    mac_budget: Optional[int] = None  # TC*TM <= budget
    mac_floor: int = 1  # TC*TM >= floor, to skip tiny arrays
    divisibility: bool = False  # keep only tile sizes dividing the layer dims
    pairs: Optional[tuple] = None  # explicit (TM, TC) pairs instead of tm_set x tc_set

    def channel_pairs(self) -> list[tuple[int, int]]:
        """(TC, TM) combinations before the MAC filters."""
        if self.pairs is not None:
            return [(tc, tm) for tm, tc in self.pairs]
        return [(tc, tm) for tc in self.tc_set for tm in self.tm_set]

    def to_dict(self) -> dict:
        d = {k: list(getattr(self, k)) for k in ("tb_set", "tc_set", "tm_set", "te_set", "tf_set")}
        d.update(mac_budget=self.mac_budget, mac_floor=self.mac_floor, divisibility=self.divisibility,
                 pairs=[list(x) for x in self.pairs] if self.pairs is not None else None)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DesignSpace":
        d = dict(d)
        for k in ("tb_set", "tc_set", "tm_set", "te_set", "tf_set"):
            if k in d:
                d[k] = tuple(d[k])
        if d.get("pairs") is not None:
            d["pairs"] = tuple(tuple(x) for x in d["pairs"])
        return cls(**d)


def reference_space() -> DesignSpace:
    """The small tile set of the reference configuration table."""
    return DesignSpace((1, 2, 3), (6, 3, 2), (21, 42, 64), (7, 13), (13,), mac_budget=128,
                       pairs=((21, 6), (42, 3), (64, 2)))


def desk_space() -> DesignSpace:
    """Default AlexNet-conv3 exploration space used by the experiments.

    The reference tile sizes extended: more channel tile sizes around a
    128-MAC array, and the output tiles 7 and 13 (a divisor-like split of 13 and the
    full map) in both dimensions.
    """
    return DesignSpace((1,), (1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 64),
                       (2, 4, 6, 8, 12, 16, 21, 24, 32, 42, 48, 64, 96, 128),
                       (7, 13), (7, 13), mac_budget=128, mac_floor=24)


def enumerate_space(space: DesignSpace, layer: Optional[LayerShape] = None) -> Iterator[TileConfig]:
    """Constrained tiles (UM=TM, UC=TC) of the space, in a fixed order.

    With ``layer`` given, tiles larger than the layer are dropped, and so
    are non-divisors when the space asks for divisibility.
    """
    sets = (space.tb_set, space.te_set, space.tf_set)
    pairs = space.channel_pairs()
    if any(len(s) == 0 for s in sets) or not pairs:
        raise EmptySpace("every tile-size set needs at least one value")
    dims = (layer.B, layer.C, layer.M, layer.E, layer.F) if layer is not None else None
    found = False
    for tb, (tc, tm), te, tf in product(space.tb_set, pairs, space.te_set, space.tf_set):
        if space.mac_budget is not None and tc * tm > space.mac_budget:
            continue
        if tc * tm < space.mac_floor:
            continue
        if dims is not None:
            vals = (tb, tc, tm, te, tf)
            if any(v > n for v, n in zip(vals, dims)):
                continue
            if space.divisibility and any(n % v for v, n in zip(vals, dims)):
                continue
        found = True
        yield TileConfig(tb, tc, tm, te, tf)
    if not found:
        raise EmptySpace("no tile survives the space constraints")


def count_points(space: DesignSpace, layer: Optional[LayerShape] = None) -> int:
    return sum(1 for _ in enumerate_space(space, layer))


@dataclass
class DsePoint:
    tile: TileConfig
    footprint: int
    perf_estimate: Optional[float] = None
    perf_simulated: Optional[float] = None
    regime: Optional[str] = None
    extra: dict = field(default_factory=dict)  # other evaluators by name

    def perf(self, evaluator: str) -> Optional[float]:
        if evaluator == "simulate":
            return self.perf_simulated
        if evaluator == "estimate":
            return self.perf_estimate
        return self.extra.get(evaluator)

    def to_row(self) -> dict:
        row = {"TB": self.tile.TB, "TC": self.tile.TC, "TM": self.tile.TM, "TE": self.tile.TE,
               "TF": self.tile.TF, "UM": self.tile.UM, "UC": self.tile.UC, "footprint": self.footprint,
               "perf_estimate": self.perf_estimate, "perf_simulated": self.perf_simulated,
               "regime": self.regime}
        for k in sorted(self.extra):
            row[f"perf_{k}"] = self.extra[k]
        return row


def _run_simulate(layer, tile):
    from accsim.simulator import simulate
    r = simulate(layer, tile, intervals=False)
    return r.performance, r.regime


def _run_estimate(layer, tile):
    r = estimate(layer, tile)
    return r.performance, r.regime


def _run_conventional(layer, tile):
    r = estimate_conventional(layer, tile)
    return r.performance, r.regime


def _run_scaled(layer, tile):
    r = estimate_conventional(layer, tile, SCALED_UNIFORM)
    return r.performance, r.regime


def _run_scaled_per_type(layer, tile):
    r = estimate_conventional(layer, tile, SCALED_PER_TYPE)
    return r.performance, r.regime


EVALUATORS: dict[str, Callable] = {
    "simulate": _run_simulate,
    "estimate": _run_estimate,
    "conventional": _run_conventional,
    "scaled": _run_scaled,
    "scaled-per-type": _run_scaled_per_type,
}


def _job(args):
    name, layer, tile = args
    return EVALUATORS[name](layer, tile)


def evaluate_points(layer: LayerShape, tiles: Iterable[TileConfig], evaluators: Sequence[str] = ("estimate",),
                    workers: int = 1, points: Optional[list[DsePoint]] = None) -> list[DsePoint]:
    """Evaluate tiles with the named evaluators; fills ``points`` in place when given."""
    for e in evaluators:
        if e not in EVALUATORS:
            raise ValueError(f"unknown evaluator {e!r}")
    if points is None:
        points = [DsePoint(t, buffer_footprint(layer, t)) for t in tiles]
    for name in evaluators:
        jobs = [(name, layer, p.tile) for p in points]
        if workers > 1:
            with ProcessPoolExecutor(workers) as ex:
                results = list(ex.map(_job, jobs, chunksize=4))
        else:
            results = [_job(j) for j in jobs]
        for p, (perf, regime) in zip(points, results):
            if name == "simulate":
                p.perf_simulated, p.regime = perf, regime
            elif name == "estimate":
                p.perf_estimate = perf
                if p.regime is None:
                    p.regime = regime
            else:
                p.extra[name] = perf
    return points


def _rank_key(p: DsePoint, evaluator: str):
    return (-p.perf(evaluator), p.footprint, p.tile.key())


def best_point(points: Sequence[DsePoint], sram_budget: float, evaluator: str = "simulate") -> DsePoint:
    """Highest performance within the budget; ties go to the smaller footprint, then the tile order."""
    feas = [p for p in points if p.footprint <= sram_budget and p.perf(evaluator) is not None]
    if not feas:
        raise Infeasible(f"no point fits an SRAM budget of {sram_budget} elements")
    return min(feas, key=lambda p: _rank_key(p, evaluator))


def budget_grid(points: Sequence[DsePoint], n: int = 12, top: Optional[float] = None) -> list[int]:
    """Logarithmic budgets from the smallest footprint up to ``top`` (default the largest)."""
    lo = min(p.footprint for p in points)
    hi = top if top is not None else max(p.footprint for p in points)
    if n < 2 or hi <= lo:
        return [int(hi)]
    return sorted({int(round(exp(log(lo) + (log(hi) - log(lo)) * k / (n - 1)))) for k in range(n)})


@dataclass
class DseResult:
    best: DsePoint
    points: list
    frontier: list  # (budget, performance, tile) per budget of the grid
    evaluator: str

    def to_dict(self) -> dict:
        return {
            "evaluator": self.evaluator,
            "best": self.best.to_row(),
            "frontier": [{"budget": b, "performance": perf, "tile": t.to_dict()} for b, perf, t in self.frontier],
            "points": [p.to_row() for p in self.points],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def frontier(points: Sequence[DsePoint], budgets: Sequence[float], evaluator: str = "simulate") -> list:
    out = []
    for b in budgets:
        try:
            p = best_point(points, b, evaluator)
        except Infeasible:
            continue
        out.append((b, p.perf(evaluator), p.tile))
    return out


def optimize(space: DesignSpace, layer: LayerShape, sram_budget: float, evaluator: str = "simulate",
             budgets: Optional[Sequence[float]] = None, workers: int = 1,
             points: Optional[list[DsePoint]] = None) -> DseResult:
    """Best tile under the SRAM budget, plus the max-performance-vs-budget curve.

    Already evaluated ``points`` can be passed to skip the evaluation.
    """
    if sram_budget <= 0:
        raise ValueError("SRAM budget must be positive")
    if points is None:
        points = evaluate_points(layer, enumerate_space(space, layer), (evaluator,), workers)
    elif any(p.perf(evaluator) is None for p in points):
        evaluate_points(layer, (), (evaluator,), workers, points)
    best = best_point(points, sram_budget, evaluator)
    if budgets is None:
        budgets = budget_grid(points, top=sram_budget)
    return DseResult(best, list(points), frontier(points, budgets, evaluator), evaluator)


def hybrid_optimize(space: DesignSpace, layer: LayerShape, sram_budget: float, top_fraction: float,
                    estimator: str = "estimate", workers: int = 1,
                    points: Optional[list[DsePoint]] = None) -> DsePoint:
    """Rank feasible points with an estimator and simulate only the best fraction.

    ceil(top_fraction * feasible) points are simulated (at least one); the
    simulated best of those is returned.
    """
    if not 0 < top_fraction <= 1:
        raise ValueError("top_fraction must be in (0, 1]")
    if sram_budget <= 0:
        raise ValueError("SRAM budget must be positive")
    if points is None:
        points = evaluate_points(layer, enumerate_space(space, layer), (estimator,), workers)
    elif any(p.perf(estimator) is None for p in points):
        evaluate_points(layer, (), (estimator,), workers, points)
    feas = sorted((p for p in points if p.footprint <= sram_budget), key=lambda p: _rank_key(p, estimator))
    if not feas:
        raise Infeasible(f"no point fits an SRAM budget of {sram_budget} elements")
    top = feas[:max(1, ceil(top_fraction * len(feas)))]
    todo = [p for p in top if p.perf_simulated is None]
    if todo:
        evaluate_points(layer, (), ("simulate",), workers, todo)
    return best_point(top, sram_budget, "simulate")


# multi-layer ----------------------------------------------------------------------

@dataclass
class MultiLayerResult:
    mode: str
    unroll: tuple  # (UM, UC)
    tiles: list
    cycles: list
    performance: float  # total ops / total cycles

    def to_dict(self) -> dict:
        return {"mode": self.mode, "unroll": list(self.unroll), "tiles": [t.to_dict() for t in self.tiles],
                "cycles": self.cycles, "performance": self.performance}


def _layer_tiles(layer: LayerShape, space: DesignSpace, um: int, uc: int, mode: str) -> Iterator[TileConfig]:
    dims = (layer.B, layer.C, layer.M, layer.E, layer.F)
    if mode == "constrained":
        pairs = [(uc, um)]
    else:
        pairs = [(tc, tm) for tc, tm in space.channel_pairs() if tc % uc == 0 and tm % um == 0]
    for tb, (tc, tm), te, tf in product(space.tb_set, pairs, space.te_set, space.tf_set):
        if any(v > n for v, n in zip((tb, tc, tm, te, tf), dims)):
            continue
        if space.divisibility and any(n % v for v, n in zip((tb, tc, tm, te, tf), dims)):
            continue
        yield TileConfig(tb, tc, tm, te, tf, um, uc)


def optimize_multilayer(layers: Sequence[LayerShape], unroll_set: Sequence[tuple], spaces: Sequence[DesignSpace],
                        sram_budget: float, mode: str = "constrained",
                        evaluate: Optional[Callable] = None) -> MultiLayerResult:
    """One (UM, UC) shared by all layers, tiles chosen per layer.

    Constrained mode ties every tile to the unroll (TM=UM, TC=UC);
    unconstrained mode lets each layer pick any multiple from its space.
    ``evaluate(layer, tile) -> cycles`` defaults to the proposed estimator.
    """
    if mode not in ("constrained", "unconstrained"):
        raise ValueError(f"unknown mode {mode!r}")
    if len(spaces) != len(layers):
        raise ValueError("one design space per layer")
    if evaluate is None:
        def evaluate(layer, tile):
            return estimate(layer, tile).total_cycles
    memo: dict = {}
    best = None
    for um, uc in sorted(set(unroll_set)):
        tiles, cycles = [], []
        for li, (layer, space) in enumerate(zip(layers, spaces)):
            cand = []
            for t in _layer_tiles(layer, space, um, uc, mode):
                fp = buffer_footprint(layer, t)
                if fp > sram_budget:
                    continue
                k = (li, t.key())
                if k not in memo:
                    memo[k] = evaluate(layer, t)
                cand.append((memo[k], fp, t.key(), t))
            if not cand:
                break
            c, _, _, t = min(cand, key=lambda x: x[:3])
            tiles.append(t)
            cycles.append(c)
        else:
            perf = sum(layer.ops for layer in layers) / sum(cycles)
            if best is None or perf > best.performance:
                best = MultiLayerResult(mode, (um, uc), tiles, cycles, perf)
    if best is None:
        raise Infeasible(f"no unroll choice fits every layer in {sram_budget} elements")
    return best


# export ---------------------------------------------------------------------------

def points_csv(points: Sequence[DsePoint]) -> str:
    rows = [p.to_row() for p in points]
    keys = list(rows[0]) if rows else []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, keys, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def frontier_csv(front: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["budget", "performance", "TB", "TC", "TM", "TE", "TF"])
    for b, perf, t in front:
        w.writerow([b, perf, t.TB, t.TC, t.TM, t.TE, t.TF])
    return buf.getvalue()
