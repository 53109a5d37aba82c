"""Top-level simulation: wires the event kernel, DRAM, bus, DMACs and the
pass controller together and collects a report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from accsim.accelerator import AccelConfig, Dmac, PassController, PassTimeline, assemble_timelines
from accsim.bus import Bus, BusConfig, phase_order_violations, phases_csv
from accsim.dram import DramConfig, DramController, check_trace_legality, trace_csv
from accsim.kernel import Engine
from accsim.memmap import DATA_TYPES, DramLayout
from accsim.workload import LayerShape, TileConfig, buffer_footprint


class ConfigError(ValueError):
    pass


class TraceUnavailable(RuntimeError):
    pass


class SimulationStalled(RuntimeError):
    pass


@dataclass
class SimReport:
    layer: LayerShape
    tile: TileConfig
    total_cycles: int
    per_pass: list[PassTimeline]
    command_counts: dict
    ops: int
    comm_limited_passes: int = 0
    violations: list[str] = field(default_factory=list)
    dram_trace: Optional[list] = None
    bus_phases: Optional[list] = None
    model: str = "simulator"

    @property
    def performance(self) -> float:
        """MAC operations (two per multiply-accumulate) per cycle."""
        return self.ops / self.total_cycles

    @property
    def regime(self) -> str:
        return "comm_limited" if 2 * self.comm_limited_passes > len(self.per_pass) else "comp_limited"

    def interval_table(self) -> list[dict]:
        rows = []
        for t in self.per_pass:
            for i, iv in enumerate(t.intervals):
                if iv.end > iv.start:
                    rows.append({"pass": t.pass_index, "interval": i, **iv.to_dict()})
        return rows

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "layer": self.layer.to_dict(),
            "tile": self.tile.to_dict(),
            "total_cycles": self.total_cycles,
            "performance": round(self.performance, 9),
            "regime": self.regime,
            "pass_count": len(self.per_pass),
            "per_pass_comm": [t.comm_cycles for t in self.per_pass],
            "per_pass_compute": [t.compute_cycles for t in self.per_pass],
            "per_pass": [t.to_dict() for t in self.per_pass],
            "command_counts": dict(self.command_counts),
            "violations": list(self.violations),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def simulate(layer: LayerShape, tile: TileConfig, bus_cfg: Optional[BusConfig] = None,
             dram_cfg: Optional[DramConfig] = None, accel_cfg: Optional[AccelConfig] = None,
             trace_dram: bool = False, trace_bus: bool = False, sram_budget: Optional[int] = None,
             strict: bool = False, check: bool = False, engine: str = "auto",
             intervals: bool = True) -> SimReport:
    """Run one layer to completion.

    ``engine`` is "event" for the object model, "fast" for the compiled
    core, or "auto" (compiled unless traces or checks are requested; both
    give identical cycle counts). With ``strict`` a footprint above
    ``sram_budget`` is a ConfigError. ``check`` replays the collected traces
    through the legality checkers and reports anything found in
    ``violations``. ``intervals=False`` skips DMA-interval assembly.
    """
    bus_cfg = bus_cfg or BusConfig()
    dram_cfg = dram_cfg or DramConfig()
    accel_cfg = accel_cfg or AccelConfig()
    try:
        tile.validate(layer)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    if strict and sram_budget is not None and buffer_footprint(layer, tile) > sram_budget:
        raise ConfigError(f"footprint {buffer_footprint(layer, tile)} exceeds SRAM budget {sram_budget}")
    if accel_cfg.max_burst_beats > dram_cfg.page_size:
        raise ConfigError("bus bursts longer than a DRAM page")
    if engine not in ("auto", "event", "fast"):
        raise ConfigError(f"unknown engine {engine!r}")
    if check:
        trace_dram = trace_bus = True
    if engine == "fast" and (trace_dram or trace_bus):
        raise ConfigError("traces are only recorded by the event engine")
    if engine == "fast" or (engine == "auto" and not (trace_dram or trace_bus)):
        return _simulate_fast(layer, tile, bus_cfg, dram_cfg, accel_cfg, intervals)

    eng = Engine()
    dram = DramController(eng, dram_cfg, trace=trace_dram)
    bus = Bus(eng, bus_cfg, dram, trace=trace_bus)
    dmacs = {dt: Dmac(dt, eng, bus, bus_cfg.max_outstanding, bus_cfg.inter_request_gap) for dt in DATA_TYPES}
    layout = DramLayout(layer, dram_cfg.page_size)
    ctl = PassController(eng, layer, tile, dmacs, accel_cfg, layout, dram_cfg.page_size)
    ctl.start()
    eng.run()
    if ctl.finished_at is None:
        raise SimulationStalled(f"simulation stopped at cycle {eng.now} before the last pass finished")

    if intervals:
        timelines = ctl.timelines()
    else:
        timelines = [PassTimeline(k, *w) for k, w in
                     enumerate(zip(ctl.win_start, ctl.comm_end, ctl.compute_start, ctl.compute_end))]
    violations = list(ctl.violations)
    if bus.max_in_flight_seen > bus_cfg.max_outstanding:
        violations.append("outstanding limit exceeded")
    if bus.beats_delivered != bus.beats_requested:
        violations.append(f"beats requested {bus.beats_requested} != delivered {bus.beats_delivered}")
    if check:
        violations += check_trace_legality(dram.trace, dram_cfg)
        violations += phase_order_violations(bus.phases)
    return _report(layer, tile, ctl.finished_at, timelines, dict(dram.counts), violations,
                   dram.trace, bus.phases)


def _report(layer, tile, total, timelines, counts, violations, dram_trace=None, phases=None) -> SimReport:
    comm_lim = sum(1 for t in timelines if t.comm_cycles > t.compute_cycles)
    return SimReport(layer, tile, total, timelines, counts, layer.ops, comm_lim, violations, dram_trace, phases)


def _simulate_fast(layer, tile, bus_cfg, dram_cfg, accel_cfg, intervals) -> SimReport:
    from accsim.fastsim import run_fast  # numba compile cost only when used

    res = run_fast(layer, tile, bus_cfg, dram_cfg, accel_cfg)
    if res.error:
        raise SimulationStalled(f"compiled core stopped with error code {res.error}")
    if res.total_cycles < 0:
        raise SimulationStalled("simulation ended before the last pass finished")
    ws, ce, cs, cend = res.windows()
    if intervals:
        timelines = assemble_timelines(ws, ce, cs, cend, res.spans(), res.ofm_periods(), res.chunks())
    else:
        timelines = [PassTimeline(k, *w) for k, w in enumerate(zip(ws, ce, cs, cend))]
    return _report(layer, tile, res.total_cycles, timelines, res.counts, res.violations(bus_cfg.max_outstanding))


def passes_csv(report) -> str:
    lines = ["pass,comm_start,comm_end,compute_start,compute_end,intervals"]
    for t in report.per_pass:
        lines.append(f"{t.pass_index},{t.comm_start},{t.comm_end},{t.compute_start},{t.compute_end},"
                     f"{len(t.intervals)}")
    return "\n".join(lines) + "\n"


def emit_trace(report: SimReport, kind: str, path) -> Path:
    """Write the dram, bus or passes trace of a report as CSV."""
    path = Path(path)
    if kind == "dram":
        if report.dram_trace is None:
            raise TraceUnavailable("DRAM trace was not collected")
        text = trace_csv(report.dram_trace)
    elif kind == "bus":
        if report.bus_phases is None:
            raise TraceUnavailable("bus phase trace was not collected")
        text = phases_csv(report.bus_phases)
    elif kind == "passes":
        if not report.per_pass:
            raise TraceUnavailable("no pass timelines in report")
        text = passes_csv(report)
    else:
        raise ValueError(f"unknown trace kind {kind!r}")
    path.write_text(text)
    return path
