"""DMACs, double-buffered on-chip SRAM and the pass pipeline controller."""

from __future__ import annotations

from bisect import bisect_left
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from accsim.kernel import PRIO_CTRL, Engine
from accsim.memmap import (DATA_TYPES, BurstRequest, DataType, DramLayout, contiguous_datasets,
                           split_into_bursts)
from accsim.workload import LayerShape, PassTile, TileConfig, compute_cycles, iter_passes


@dataclass(frozen=True)
class AccelConfig:
    max_burst_beats: int = 16
    setup_cycles: int = 20  # processor-core sync before the first DMA command of a pass
    stagger_cycles: int = 10  # W command programmed after the IFM command
    fill_cycles: int = 8

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class DmaCommand:
    dmac: DataType
    bursts: list
    pass_index: int

    @property
    def beats(self) -> int:
        return sum(b.beats for b in self.bursts)


@dataclass
class DmaInterval:
    active_dmacs: frozenset
    start: int
    end: int
    beats_transferred: dict

    @property
    def bandwidth(self) -> float:
        return sum(self.beats_transferred.values()) / (self.end - self.start)

    def to_dict(self) -> dict:
        return {"active": sorted(d.value for d in self.active_dmacs), "start": self.start, "end": self.end,
                "beats": {d.value: n for d, n in sorted(self.beats_transferred.items())},
                "bandwidth": round(self.bandwidth, 6)}


@dataclass
class PassTimeline:
    pass_index: int
    comm_start: int
    comm_end: int
    compute_start: int
    compute_end: int
    intervals: list = field(default_factory=list)

    @property
    def comm_cycles(self) -> int:
        return self.comm_end - self.comm_start

    @property
    def compute_cycles(self) -> int:
        return self.compute_end - self.compute_start

    def to_dict(self) -> dict:
        return {"pass": self.pass_index, "comm_start": self.comm_start, "comm_end": self.comm_end,
                "compute_start": self.compute_start, "compute_end": self.compute_end,
                "intervals": [iv.to_dict() for iv in self.intervals]}


def build_pass_commands(layer: LayerShape, tile: TileConfig, p: PassTile, layout: Optional[DramLayout] = None,
                        max_burst_beats: int = 16, page_size: int = 1024, types=DATA_TYPES) -> dict:
    """DMA commands for one pass: IFM and W always, OFM when the pass completes an output tile."""
    if layout is None:
        layout = DramLayout(layer, page_size)
    out = {}
    for dt in types:
        if dt is DataType.OFM and not p.last_c:
            continue
        bursts = []
        for ds in contiguous_datasets(dt, layer, p, layout):
            bursts.extend(split_into_bursts(ds, max_burst_beats, page_size))
        out[dt] = DmaCommand(dt, bursts, p.index)
    return out


def measure_bandwidth(timeline: PassTimeline) -> list[float]:
    """Elements per cycle of every non-empty interval of a pass."""
    return [iv.bandwidth for iv in timeline.intervals if iv.end > iv.start]


def pass_bandwidth(timeline: PassTimeline) -> float:
    ivs = [iv for iv in timeline.intervals if iv.end > iv.start]
    span = sum(iv.end - iv.start for iv in ivs)
    return sum(sum(iv.beats_transferred.values()) for iv in ivs) / span if span else 0.0


def beats_in(ts, ns, start: int, end: int) -> int:
    """Data-bus beats in [start, end) from chunk logs sorted by start; one beat per cycle."""
    i = bisect_left(ts, start - 16)
    total = 0
    while i < len(ts) and ts[i] < end:
        a, n = ts[i], ns[i]
        lo, hi = max(a, start), min(a + n, end)
        if hi > lo:
            total += hi - lo
        i += 1
    return total


def assemble_timelines(win_start, comm_end, compute_start, compute_end, spans, ofm_periods, chunks) -> list:
    """Cut every pass's communication window into DMA intervals.

    ``spans[k]`` maps IFM/W to the (start, end) of that pass's command,
    ``ofm_periods`` lists OFM DMAC running periods in start order and
    ``chunks`` maps each data type to its (start cycles, beat counts) log.
    Adjacent pieces with the same active set are merged.
    """
    starts = [a for a, _ in ofm_periods]
    out = []
    for k in range(len(win_start)):
        ws, ce = win_start[k], comm_end[k]
        sp = spans[k]
        cuts = {ws, ce}
        for a, b in sp.values():
            cuts.update(x for x in (a, b) if ws < x < ce)
        i = max(bisect_left(starts, ws) - 1, 0)
        ofm_in = []
        while i < len(ofm_periods) and ofm_periods[i][0] < ce:
            a, b = ofm_periods[i]
            b = ce if b is None else b
            if b > ws:
                ofm_in.append((a, b))
                cuts.update(x for x in (a, b) if ws < x < ce)
            i += 1
        cuts = sorted(cuts)
        ivs: list[DmaInterval] = []
        for s, e in zip(cuts, cuts[1:]):
            act = {dt for dt, (a, b) in sp.items() if a <= s and e <= b}
            if any(a <= s and e <= b for a, b in ofm_in):
                act.add(DataType.OFM)
            act = frozenset(act)
            beats = {dt: beats_in(*chunks[dt], s, e) for dt in act}
            if ivs and ivs[-1].active_dmacs == act:
                last = ivs[-1]
                last.end = e
                for dt in act:
                    last.beats_transferred[dt] += beats[dt]
            else:
                ivs.append(DmaInterval(act, s, e, beats))
        out.append(PassTimeline(k, ws, ce, compute_start[k], compute_end[k], ivs))
    return out


class Dmac:
    """One DMA controller: a command FIFO issuing bursts with bounded outstanding."""

    def __init__(self, name: DataType, engine: Engine, bus, max_outstanding: int, gap: int = 0):
        self.name = name
        self.engine = engine
        self.bus = bus
        self.max_outstanding = max_outstanding
        self.gap = max(gap, 1)
        self.status = "idle"
        self.in_flight = 0
        self.completed_beats = 0
        self.commands: deque = deque()
        self.cur: Optional[DmaCommand] = None
        self._next = 0
        self._left = 0
        self._requesting = False
        self._last_issue = -(1 << 40)
        self.on_done = None
        self.chunk_t: list[int] = []
        self.chunk_n: list[int] = []
        self.activity: list[list[int]] = []  # [start, end] of running periods
        bus.attach(self)

    def push(self, cmd: DmaCommand) -> None:
        self.commands.append(cmd)
        if self.status != "running":
            self._start(self.engine.now)

    def _start(self, cycle: int) -> None:
        self.cur = self.commands.popleft()
        self._next = 0
        self._left = len(self.cur.bursts)
        self.status = "running"
        self.activity.append([cycle, None])
        if not self._left:
            self._finish(cycle)
            return
        self._try(cycle)

    def _try(self, cycle: int) -> None:
        if self._requesting or self._next >= len(self.cur.bursts) or self.in_flight >= self.max_outstanding:
            return
        self._requesting = True
        self.bus.request(self, max(cycle, self._last_issue + self.gap))

    def on_grant(self, cycle: int) -> BurstRequest:
        b = self.cur.bursts[self._next]
        self._next += 1
        self.in_flight += 1
        self._last_issue = cycle
        self._requesting = False
        # ask for the address channel again; the bus grants from cycle + 1
        self._try(cycle)
        return b

    def on_complete(self, burst: BurstRequest, cycle: int) -> None:
        self.in_flight -= 1
        self.completed_beats += burst.beats
        self._left -= 1
        if self._left == 0:
            self._finish(cycle)
        else:
            self._try(cycle)

    def _finish(self, cycle: int) -> None:
        cmd = self.cur
        self.activity[-1][1] = cycle
        self.status = "done"
        self.cur = None
        if self.on_done is not None:
            self.on_done(self, cmd, cycle)
        if self.commands and self.status != "running":
            self._start(cycle)

    def log_beats(self, cycle: int, n: int) -> None:
        self.chunk_t.append(cycle)
        self.chunk_n.append(n)

    def beats_between(self, start: int, end: int) -> int:
        return beats_in(self.chunk_t, self.chunk_n, start, end)


class PassController:
    """Sequences processing passes over the three DMACs and the MAC array.

    Pass k loads into buffer k % 2 while the MAC array computes pass k-1 on
    the other buffer; the buffers switch when both are finished. Output
    tiles accumulate in obuf (group % 2) and are stored after the last
    input-channel pass of the group, overlapping later passes.
    """

    def __init__(self, engine: Engine, layer: LayerShape, tile: TileConfig, dmacs: dict,
                 cfg: AccelConfig, layout: DramLayout, page_size: int):
        self.engine = engine
        self.layer = layer
        self.tile = tile
        self.cfg = cfg
        self.layout = layout
        self.page_size = page_size
        self.dmacs = dmacs
        for d in dmacs.values():
            d.on_done = self._dma_done
        self.passes = list(iter_passes(layer, tile))
        n = len(self.passes)
        self.win_start = [0] * n
        self.comm_end = [None] * n
        self.compute_start = [None] * n
        self.compute_end = [None] * n
        self.cmd_span = [dict() for _ in range(n)]
        self._pending_dma = [0] * n
        self.ofm_done: dict[int, int] = {}
        self.ofm_start: dict[int, int] = {}
        self.violations: list[str] = []
        self._waiting = 0
        self.finished_at: Optional[int] = None

    def start(self) -> None:
        self._open_window(0, 0)

    def _open_window(self, k: int, t: int) -> None:
        self.win_start[k] = t
        if k >= 2 and (self.compute_end[k - 2] is None or self.compute_end[k - 2] > t):
            self.violations.append(f"pass {k}: DMA into buffer still read by pass {k - 2}")
        cmds = build_pass_commands(self.layer, self.tile, self.passes[k], self.layout,
                                   self.cfg.max_burst_beats, self.page_size, (DataType.IFM, DataType.W))
        self._pending_dma[k] = 2
        self.engine.at(t + self.cfg.setup_cycles, PRIO_CTRL, self._launch, DataType.IFM, cmds[DataType.IFM])
        self.engine.at(t + self.cfg.setup_cycles + self.cfg.stagger_cycles, PRIO_CTRL, self._launch,
                       DataType.W, cmds[DataType.W])

    def _launch(self, dt: DataType, cmd: DmaCommand) -> None:
        self.cmd_span[cmd.pass_index][dt] = [self.engine.now, None]
        self.dmacs[dt].push(cmd)

    def _dma_done(self, dmac: Dmac, cmd: DmaCommand, cycle: int) -> None:
        k = cmd.pass_index
        if dmac.name is DataType.OFM:
            g = self.passes[k].group
            self.ofm_done[g] = cycle
            self._maybe_finish()
            self._try_switch()
            return
        self.cmd_span[k][dmac.name][1] = cycle
        self._pending_dma[k] -= 1
        if self._pending_dma[k] == 0:
            self.comm_end[k] = cycle
            self._try_switch()

    def _try_switch(self) -> None:
        k = self._waiting
        if k >= len(self.passes) or self.comm_end[k] is None:
            return
        if k > 0 and self.compute_end[k - 1] is None:
            return
        p = self.passes[k]
        if p.first_c and p.group >= 2 and (p.group - 2) not in self.ofm_done:
            return
        now = self.engine.now
        self._waiting = k + 1
        self.compute_start[k] = now
        cyc = compute_cycles(self.layer, self.tile, p.tb, p.tc, p.tm, p.te, p.tf, self.cfg.fill_cycles)
        self.engine.at(now + cyc, PRIO_CTRL, self._compute_done, k)
        if k + 1 < len(self.passes):
            self._open_window(k + 1, now)

    def _compute_done(self, k: int) -> None:
        now = self.engine.now
        self.compute_end[k] = now
        p = self.passes[k]
        if p.last_c:
            cmd = build_pass_commands(self.layer, self.tile, p, self.layout, self.cfg.max_burst_beats,
                                      self.page_size, (DataType.OFM,))[DataType.OFM]
            self.ofm_start[p.group] = now
            self.dmacs[DataType.OFM].push(cmd)
        self._maybe_finish()
        self._try_switch()

    def _maybe_finish(self) -> None:
        last = len(self.passes) - 1
        if self.compute_end[last] is not None and self.passes[last].group in self.ofm_done:
            self.finished_at = max(self.compute_end[last], self.ofm_done[self.passes[last].group])

    # reporting --------------------------------------------------------------

    def timelines(self) -> list[PassTimeline]:
        spans = [{dt: tuple(v) for dt, v in sp.items()} for sp in self.cmd_span]
        chunks = {dt: (d.chunk_t, d.chunk_n) for dt, d in self.dmacs.items()}
        return assemble_timelines(self.win_start, self.comm_end, self.compute_start, self.compute_end,
                                  spans, self.dmacs[DataType.OFM].activity, chunks)
