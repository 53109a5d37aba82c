"""Bank-level DRAM model: FR-FCFS scheduling, open-page mode with an
N-time close policy, per-command timing, periodic refresh.

One command per cycle on the command bus. One column command moves up to
``dram_burst_beats`` elements and occupies the data bus for ``tBURST``
cycles. A direction change on the data bus costs one extra ``tBURST``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

from accsim.kernel import PRIO_DRAM, Engine
from accsim.memmap import BurstRequest

ACT, RD, WR, PRE, REF = "ACT", "RD", "WR", "PRE", "REF"
_BIG = 1 << 62


class QueueFull(RuntimeError):
    """Backpressure: the controller's request queue is at its configured depth."""


@dataclass(frozen=True)
class DramTiming:
    tRCD: int = 10
    tRP: int = 10
    tCL: int = 10
    tBURST: int = 8
    tRC: int = 24
    refresh_period: int = 3120
    refresh_duration: int = 52

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if v < 1:
                raise ValueError(f"{k} must be >= 1")
        if self.tRC < self.tRCD + self.tRP:
            raise ValueError("tRC must be >= tRCD + tRP")

    @property
    def tRAS(self) -> int:
        return self.tRC - self.tRP


@dataclass(frozen=True)
class DramConfig:
    timing: DramTiming = field(default_factory=DramTiming)
    page_size: int = 1024
    n_banks: int = 8
    dram_burst_beats: int = 8
    close_after: int = 4
    queue_depth: int = 32
    turnaround: bool = True
    refresh: bool = True

    def decode(self, addr: int) -> tuple[int, int, int]:
        """(bank, row, column) of an element address; bank from low page-index bits."""
        page, col = divmod(addr, self.page_size)
        return page % self.n_banks, page // self.n_banks, col

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("page_size", "n_banks", "dram_burst_beats", "close_after",
                                           "queue_depth", "turnaround", "refresh")}
        d["timing"] = dict(self.timing.__dict__)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DramConfig":
        d = dict(d)
        timing = DramTiming(**d.pop("timing", {}))
        return cls(timing=timing, **d)


class DramCommand(NamedTuple):
    cycle: int
    kind: str
    bank: int
    row: int
    col: int
    source: str


class BankState:
    __slots__ = ("bank_id", "row", "cols", "next_act", "next_col", "next_pre", "queue")

    def __init__(self, bank_id: int):
        self.bank_id = bank_id
        self.row: Optional[int] = None
        self.cols = 0  # column commands since the last ACT
        self.next_act = 0
        self.next_col = 0
        self.next_pre = 0
        self.queue: list[_Req] = []

    @property
    def state(self):
        return "idle" if self.row is None else ("active", self.row)


class _Req:
    __slots__ = ("tag", "bank", "row", "col", "is_write", "units", "next_unit", "ready", "seq", "source")

    def __init__(self, tag, bank, row, col, is_write, units, ready, seq, source):
        self.tag = tag
        self.bank = bank
        self.row = row
        self.col = col
        self.is_write = is_write
        self.units = units
        self.next_unit = 0
        self.ready = ready
        self.seq = seq
        self.source = source


def column_units(beats: int, dram_burst_beats: int) -> list[int]:
    full, rem = divmod(beats, dram_burst_beats)
    return [dram_burst_beats] * full + ([rem] if rem else [])


class _RecordingSink:
    def __init__(self):
        self.completion: dict = {}
        self.beats: dict = {}

    def data(self, tag, first_cycle, n, is_write):
        self.beats[tag] = self.beats.get(tag, 0) + n

    def done(self, tag, cycle):
        self.completion[tag] = cycle


def fr_fcfs_pick(banks: Sequence[BankState], cycle: int, ctl: "DramController"):
    """First-ready FCFS over all bank queues at ``cycle``.

    Returns ``(choice, next_ready)``. ``choice`` is ``(kind, bank, request)``
    for the best command that can issue now (row-hit column commands first,
    then by request age), or None; ``next_ready`` is the earliest cycle at
    which some currently blocked candidate becomes issuable.
    """
    cfg = ctl.cfg
    t = cfg.timing
    cmd_free = ctl.cmd_free
    best = None
    best_key = None
    nxt = _BIG

    due = ctl.refresh_due
    if due is not None and due <= cycle:
        idle = True
        for b in banks:
            if b.row is not None:
                idle = False
                r = b.next_pre if b.next_pre > cmd_free else cmd_free
                if r <= cycle:
                    if best is None:
                        best = (PRE, b, None)
                elif r < nxt:
                    nxt = r
        if idle:
            r = max(cmd_free, due, max(b.next_act for b in banks))
            if r <= cycle:
                best = (REF, None, None)
            else:
                nxt = r
        return best, nxt

    close_after = cfg.close_after
    tCL = t.tCL
    dbus_free = ctl.dbus_free
    dbus_dir = ctl.dbus_dir
    d_other = dbus_free + (t.tBURST if cfg.turnaround else 0) if dbus_dir is not None else dbus_free
    active = False
    for b in banks:
        q = b.queue
        row = b.row
        if row is None:
            if not q:
                continue
            active = True
            req = q[0]
            r = b.next_act
            if r < cmd_free:
                r = cmd_free
            if r <= cycle:
                if best_key is None or best_key[0] > 1 or (best_key[0] == 1 and req.seq < best_key[1]):
                    best, best_key = (ACT, b, req), (1, req.seq)
            elif r < nxt:
                nxt = r
            continue
        active = True
        hit = False
        if b.cols < close_after:
            for req in q:
                if req.row != row:
                    continue
                hit = True
                w = req.is_write
                r = (d_other if dbus_dir is not w else dbus_free) - tCL
                if r < b.next_col:
                    r = b.next_col
                if r < cmd_free:
                    r = cmd_free
                if w:
                    rd = req.ready[req.next_unit]
                    if rd > r:
                        r = rd
                if r <= cycle:
                    if best_key is None or best_key[0] > 0 or req.seq < best_key[1]:
                        best, best_key = ("COL", b, req), (0, req.seq)
                    break
                if r < nxt:
                    nxt = r
        if not hit:
            # forced close after the column budget, or no pending hit for the open row
            r = b.next_pre
            if r < cmd_free:
                r = cmd_free
            if r <= cycle:
                key = (1, q[0].seq) if q else (2, b.bank_id)
                if best_key is None or key < best_key:
                    best, best_key = (PRE, b, None), key
            elif r < nxt:
                nxt = r
    if active and due is not None and due < nxt:
        nxt = due
    return best, nxt


class DramController:
    def __init__(self, engine: Engine, cfg: Optional[DramConfig] = None, sink=None, trace: bool = False):
        self.engine = engine
        self.cfg = cfg or DramConfig()
        self.banks = [BankState(i) for i in range(self.cfg.n_banks)]
        self.sink = sink if sink is not None else _RecordingSink()
        self.trace: Optional[list[DramCommand]] = [] if trace else None
        self.cmd_free = 0
        self.dbus_free = 0
        self.dbus_dir: Optional[bool] = None
        self.refresh_due = self.cfg.timing.refresh_period if self.cfg.refresh else None
        self.queued = 0
        self.counts = {ACT: 0, RD: 0, WR: 0, PRE: 0, REF: 0}
        self._seq = 0
        self._wake_at: Optional[int] = None

    # request side -----------------------------------------------------------

    def enqueue(self, req: BurstRequest, arrival: int, tag=None, source: str = "",
                data_ready: Optional[Sequence[int]] = None) -> int:
        """Queue a burst arriving at ``arrival``; returns the request id.

        For writes ``data_ready`` gives, per column unit, the cycle its data
        is available in the controller (defaults to the arrival cycle).
        """
        if arrival < self.engine.now:
            raise ValueError(f"arrival {arrival} is in the past (now {self.engine.now})")
        self._seq += 1
        rid = self._seq
        self.engine.at(arrival, PRIO_DRAM, self._insert, rid, req, rid if tag is None else tag,
                       source or req.issuing_dmac.value, data_ready)
        return rid

    def can_accept(self) -> bool:
        return self.queued < self.cfg.queue_depth

    def _insert(self, rid, req, tag, source, data_ready):
        if self.queued >= self.cfg.queue_depth:
            raise QueueFull(f"queue depth {self.cfg.queue_depth} exceeded")
        cfg = self.cfg
        bank, row, col = cfg.decode(req.start_addr)
        units = column_units(req.beats, cfg.dram_burst_beats)
        w = req.is_write
        ready = None
        if w:
            now = self.engine.now
            ready = list(data_ready) if data_ready is not None else [now] * len(units)
        self.banks[bank].queue.append(_Req(tag, bank, row, col, w, units, ready, rid, source))
        self.queued += 1
        self._kick(self.engine.now)

    # scheduling -------------------------------------------------------------

    def _kick(self, cycle: int) -> None:
        if self._wake_at is None or cycle < self._wake_at:
            self._wake_at = cycle
            self.engine.at(cycle, PRIO_DRAM, self._wake, cycle)

    def _wake(self, cycle: int) -> None:
        if cycle != self._wake_at:
            return
        self._wake_at = None
        choice, nxt = fr_fcfs_pick(self.banks, cycle, self)
        while choice is not None and choice[0] == REF:
            # overdue refreshes from an idle stretch do not take this cycle's slot
            self._issue(choice, cycle)
            choice, nxt = fr_fcfs_pick(self.banks, cycle, self)
        if choice is not None:
            self._issue(choice, cycle)
            choice, nxt = fr_fcfs_pick(self.banks, cycle + 1, self)
            if choice is not None:
                nxt = cycle + 1
        if nxt < _BIG:
            self._kick(nxt)

    def _issue(self, choice, cycle: int) -> None:
        kind, b, req = choice
        t = self.cfg.timing
        counts = self.counts
        if kind == "COL":
            w = req.is_write
            kind = WR if w else RD
            d = cycle + t.tCL
            self.dbus_free = d + t.tBURST
            self.dbus_dir = w
            b.cols += 1
            b.next_col = cycle + t.tBURST
            p = d + t.tBURST if w else cycle + t.tBURST
            if p > b.next_pre:
                b.next_pre = p
            n = req.units[req.next_unit]
            col = req.col + req.next_unit * self.cfg.dram_burst_beats
            req.next_unit += 1
            self.sink.data(req.tag, d, n, w)
            if req.next_unit == len(req.units):
                b.queue.remove(req)
                self.queued -= 1
                self.sink.done(req.tag, d + t.tBURST)
            if self.trace is not None:
                self.trace.append(DramCommand(cycle, kind, b.bank_id, b.row, col, req.source))
        elif kind == ACT:
            b.row = req.row
            b.cols = 0
            b.next_col = cycle + t.tRCD
            b.next_pre = max(b.next_pre, cycle + t.tRAS)
            b.next_act = cycle + t.tRC
            if self.trace is not None:
                self.trace.append(DramCommand(cycle, ACT, b.bank_id, req.row, 0, req.source))
        elif kind == PRE:
            if self.trace is not None:
                self.trace.append(DramCommand(cycle, PRE, b.bank_id, b.row, 0, ""))
            b.row = None
            b.cols = 0
            b.next_act = max(b.next_act, cycle + t.tRP)
        else:  # REF: idle catch-up may place it before the current cycle
            cycle = max(self.cmd_free, self.refresh_due, max(x.next_act for x in self.banks))
            end = cycle + t.refresh_duration
            for x in self.banks:
                x.next_act = end
            self.refresh_due += t.refresh_period
            if self.trace is not None:
                self.trace.append(DramCommand(cycle, REF, -1, -1, 0, ""))
        counts[kind] += 1
        self.cmd_free = cycle + 1


def service_trace(requests: Sequence[tuple[BurstRequest, int]], cfg: Optional[DramConfig] = None):
    """Serve a list of (burst, arrival cycle) pairs in isolation.

    Returns (completion cycle per request, command trace).
    """
    eng = Engine()
    ctl = DramController(eng, cfg, trace=True)
    for i, (req, arrival) in enumerate(requests):
        ctl.enqueue(req, arrival, tag=i)
    eng.run()
    return [ctl.sink.completion[i] for i in range(len(requests))], ctl.trace


def count_commands(trace: Sequence[DramCommand], source: Optional[str] = None) -> dict[str, int]:
    out = {ACT: 0, RD: 0, WR: 0, PRE: 0, REF: 0}
    for c in trace:
        if source is None or c.source == source or c.kind in (PRE, REF):
            out[c.kind] += 1
    return out


def check_trace_legality(trace: Sequence[DramCommand], cfg: Optional[DramConfig] = None) -> list[str]:
    """Replay a command trace against bank state; returns violation messages."""
    cfg = cfg or DramConfig()
    t = cfg.timing
    row: dict[int, Optional[int]] = {i: None for i in range(cfg.n_banks)}
    cols = {i: 0 for i in range(cfg.n_banks)}
    last_act = {i: -_BIG for i in range(cfg.n_banks)}
    last_pre = {i: -_BIG for i in range(cfg.n_banks)}
    last_cycle = -1
    bad = []
    for c in trace:
        if c.cycle <= last_cycle:
            bad.append(f"{c}: more than one command per cycle or out of order")
        last_cycle = c.cycle
        if c.kind == REF:
            if any(r is not None for r in row.values()):
                bad.append(f"{c}: refresh with open banks")
            continue
        b = c.bank
        if c.kind == ACT:
            if row[b] is not None:
                bad.append(f"{c}: ACT to active bank")
            if c.cycle < last_pre[b] + t.tRP or c.cycle < last_act[b] + t.tRC:
                bad.append(f"{c}: ACT violates tRP/tRC")
            row[b], cols[b], last_act[b] = c.row, 0, c.cycle
        elif c.kind in (RD, WR):
            if row[b] != c.row:
                bad.append(f"{c}: column command to row {c.row}, open row {row[b]}")
            if c.cycle < last_act[b] + t.tRCD:
                bad.append(f"{c}: column command violates tRCD")
            cols[b] += 1
            if cols[b] > cfg.close_after:
                bad.append(f"{c}: more than {cfg.close_after} column commands in one activation")
        elif c.kind == PRE:
            if row[b] is None:
                bad.append(f"{c}: PRE to idle bank")
            row[b], last_pre[b] = None, c.cycle
    return bad


def trace_csv(trace: Sequence[DramCommand]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cycle", "kind", "bank", "row", "col", "source_dmac"])
    for c in trace:
        w.writerow([c.cycle, c.kind, c.bank, c.row, c.col, c.source])
    return buf.getvalue()
