"""Burst-transaction bus between the DMACs and the DRAM controller.

Each transaction goes through request phases (BEG_REQ/END_REQ), then one
data handshake per beat: BEG_RSP/END_RSP per read beat, BEG_DAT/END_DAT per
write beat, and for writes a final BEG_RSP/END_RSP acknowledgment.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from accsim.kernel import PRIO_BUS, Engine
from accsim.memmap import BurstRequest

BEG_REQ, END_REQ, BEG_DAT, END_DAT, BEG_RSP, END_RSP = (
    "BEG_REQ", "END_REQ", "BEG_DAT", "END_DAT", "BEG_RSP", "END_RSP")


class IssueRejected(RuntimeError):
    pass


@dataclass(frozen=True)
class BusConfig:
    max_outstanding: int = 2
    request_latency: int = 5
    inter_request_gap: int = 0
    handshake: int = 1
    read_interleave: bool = False
    data_width: int = 1

    def __post_init__(self):
        if self.max_outstanding < 1:
            raise ValueError("max_outstanding must be >= 1")
        if self.request_latency < 0 or self.inter_request_gap < 0 or self.handshake < 1:
            raise ValueError("bus latencies must be non-negative, handshake >= 1")
        if self.data_width != 1:
            raise ValueError("only one element per beat is modelled")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class ProtocolPhase(NamedTuple):
    cycle: int
    txn: int
    phase: str
    beat: int


def next_round_robin(candidates: Sequence, order: Sequence, last) -> object:
    """First candidate after ``last`` in the cyclic ``order``."""
    n = len(order)
    start = order.index(last) + 1 if last in order else 0
    cand = set(candidates)
    for i in range(n):
        m = order[(start + i) % n]
        if m in cand:
            return m
    raise ValueError("no candidates")


def arbitrate(pending: dict, order: Optional[Sequence] = None, last=None) -> list:
    """Grant order for per-master pending burst counts under round-robin.

    Every grant takes the address channel for one cycle; the returned list
    is the master granted in each successive cycle.
    """
    left = {k: v for k, v in pending.items() if v > 0}
    order = list(order) if order is not None else list(pending)
    grants = []
    while left:
        m = next_round_robin(left, order, last)
        grants.append(m)
        left[m] -= 1
        if not left[m]:
            del left[m]
        last = m
    return grants


class _Txn:
    __slots__ = ("id", "master", "burst", "issued", "delivered", "held", "prev", "succ", "done")

    def __init__(self, tid, master, burst, issued):
        self.id = tid
        self.master = master
        self.burst = burst
        self.issued = issued
        self.delivered = 0
        self.held: list = []
        self.prev: Optional[_Txn] = None
        self.succ: Optional[_Txn] = None
        self.done = False


class Bus:
    """Shared AXI-like port. Masters must provide ``name``, ``on_grant(cycle)``
    returning the next burst, ``on_complete(burst, cycle)`` and
    ``log_beats(cycle, n)``."""

    def __init__(self, engine: Engine, cfg: Optional[BusConfig], dram, trace: bool = False):
        self.engine = engine
        self.cfg = cfg or BusConfig()
        self.dram = dram
        dram.sink = self
        self.masters: list = []
        self._log: dict = {}
        self.in_flight: dict = {}
        self.txns: dict[int, _Txn] = {}
        self._tid = 0
        self._last_read: dict = {}
        self.addr_free = 0
        self.r_free = 0
        self.w_free = 0
        self._pending: dict = {}
        self._arb_at: Optional[int] = None
        self._last_grant = None
        self.phases: Optional[list[ProtocolPhase]] = [] if trace else None
        self.max_in_flight_seen = 0
        self.beats_requested = 0
        self.beats_delivered = 0

    def attach(self, master) -> None:
        self.masters.append(master)
        self.in_flight[master] = 0
        self._log[master] = getattr(master, "log_beats", None)

    # arbitration ------------------------------------------------------------

    def request(self, master, cycle: int) -> None:
        """Master asks for the address channel from ``cycle`` on."""
        self._pending[master] = cycle
        t = max(cycle, self.addr_free, self.engine.now)
        if self._arb_at is None or t < self._arb_at:
            self._arb_at = t
            self.engine.at(t, PRIO_BUS, self._arbitrate, t)

    def _arbitrate(self, cycle: int) -> None:
        if cycle != self._arb_at:
            return
        self._arb_at = None
        pend = self._pending
        ready = False
        masters = self.masters
        n = len(masters)
        start = masters.index(self._last_grant) + 1 if self._last_grant is not None else 0
        for i in range(n):
            m = masters[(start + i) % n]
            t = pend.get(m)
            if t is not None and t <= cycle:
                ready = True
                break
        if ready:
            self._last_grant = m
            del self._pending[m]
            self.addr_free = cycle + 1
            burst = m.on_grant(cycle)
            self.issue(burst, cycle, m)
        if self._pending:
            t = max(self.addr_free, min(self._pending.values()), cycle + 1 if ready else cycle)
            if self._arb_at is None or t < self._arb_at:
                self._arb_at = t
                self.engine.at(t, PRIO_BUS, self._arbitrate, t)

    # request path -----------------------------------------------------------

    def issue(self, burst: BurstRequest, cycle: int, master=None) -> int:
        """Start a burst transaction at ``cycle``; returns its transaction id."""
        cfg = self.cfg
        if master is None:
            master = burst.issuing_dmac
            self.in_flight.setdefault(master, 0)
        if self.in_flight[master] >= cfg.max_outstanding:
            raise IssueRejected(f"{getattr(master, 'name', master)} already has "
                                f"{cfg.max_outstanding} outstanding transactions")
        self.in_flight[master] += 1
        if self.in_flight[master] > self.max_in_flight_seen:
            self.max_in_flight_seen = self.in_flight[master]
        self._tid += 1
        txn = _Txn(self._tid, master, burst, cycle)
        self.txns[txn.id] = txn
        self.beats_requested += burst.beats
        ph = self.phases
        hs = cfg.handshake
        if ph is not None:
            ph.append(ProtocolPhase(cycle, txn.id, BEG_REQ, -1))
            ph.append(ProtocolPhase(cycle + hs, txn.id, END_REQ, -1))
        arrival = cycle + hs + cfg.request_latency
        data_ready = None
        if burst.is_write:
            s = max(cycle + hs, self.w_free)
            self.w_free = s + burst.beats
            if ph is not None:
                for k in range(burst.beats):
                    ph.append(ProtocolPhase(s + k, txn.id, BEG_DAT, k))
                    ph.append(ProtocolPhase(s + k + 1, txn.id, END_DAT, k))
            dbb = self.dram.cfg.dram_burst_beats
            data_ready = [s + min(u + dbb, burst.beats) + cfg.request_latency
                          for u in range(0, burst.beats, dbb)]
        elif not cfg.read_interleave:
            prev = self._last_read.get(master)
            if prev is not None and not prev.done:
                txn.prev = prev
                prev.succ = txn
            self._last_read[master] = txn
        name = getattr(master, "name", master)
        self.dram.enqueue(burst, arrival, tag=txn.id, source=getattr(name, "value", str(name)),
                          data_ready=data_ready)
        return txn.id

    # DRAM callbacks ---------------------------------------------------------

    def data(self, tag: int, first_cycle: int, n: int, is_write: bool) -> None:
        txn = self.txns[tag]
        log = self._log.get(txn.master)
        if log is not None:
            log(first_cycle, n)
        if is_write:
            return
        if txn.prev is not None and not txn.prev.done:
            txn.held.append((first_cycle, n))
        else:
            self.deliver_beats(txn, first_cycle, n)

    def deliver_beats(self, txn: _Txn, avail: int, n: int) -> None:
        """Put ``n`` read beats on the shared R channel, one beat per cycle."""
        s = avail if avail > self.r_free else self.r_free
        self.r_free = s + n
        ph = self.phases
        if ph is not None:
            k0 = txn.delivered
            for k in range(n):
                ph.append(ProtocolPhase(s + k, txn.id, BEG_RSP, k0 + k))
                ph.append(ProtocolPhase(s + k + 1, txn.id, END_RSP, k0 + k))
        txn.delivered += n
        self.beats_delivered += n
        if txn.delivered == txn.burst.beats:
            end = s + n
            txn.done = True
            self.engine.at(end, PRIO_BUS, self._complete, txn, end)
            nxt = txn.succ
            if nxt is not None:
                held, nxt.held = nxt.held, []
                for a, m in held:
                    self.deliver_beats(nxt, max(a, end), m)

    def done(self, tag: int, cycle: int) -> None:
        txn = self.txns[tag]
        if not txn.burst.is_write:
            return
        hs = self.cfg.handshake
        if self.phases is not None:
            self.phases.append(ProtocolPhase(cycle, txn.id, BEG_RSP, -1))
            self.phases.append(ProtocolPhase(cycle + hs, txn.id, END_RSP, -1))
        txn.done = True
        self.beats_delivered += txn.burst.beats
        self.engine.at(cycle + hs, PRIO_BUS, self._complete, txn, cycle + hs)

    def _complete(self, txn: _Txn, cycle: int) -> None:
        self.in_flight[txn.master] -= 1
        del self.txns[txn.id]
        cb = getattr(txn.master, "on_complete", None)
        if cb is not None:
            cb(txn.burst, cycle)


def phase_order_violations(phases: Sequence[ProtocolPhase]) -> list[str]:
    """Check per-transaction phase ordering on a recorded phase trace."""
    by_txn: dict[int, list[ProtocolPhase]] = {}
    for p in phases:
        by_txn.setdefault(p.txn, []).append(p)
    bad = []
    for tid, ps in by_txn.items():
        req = {p.phase: p.cycle for p in ps if p.beat == -1 and p.phase in (BEG_REQ, END_REQ)}
        if BEG_REQ not in req or END_REQ not in req or not req[BEG_REQ] < req[END_REQ]:
            bad.append(f"txn {tid}: missing or unordered request phases")
            continue
        data = [p for p in ps if p.phase not in (BEG_REQ, END_REQ)]
        if any(p.cycle <= req[END_REQ] - 1 for p in data):
            bad.append(f"txn {tid}: data/response phase before END_REQ")
        beats: dict[tuple, dict] = {}
        for p in data:
            kind = "DAT" if p.phase in (BEG_DAT, END_DAT) else "RSP"
            beats.setdefault((kind, p.beat), {})[p.phase[:3]] = p.cycle
        for (kind, beat), d in beats.items():
            if "BEG" not in d or "END" not in d or d["BEG"] >= d["END"]:
                bad.append(f"txn {tid}: beat {beat} {kind} handshake out of order")
    return bad


def data_channel_overlaps(phases: Sequence[ProtocolPhase]) -> int:
    """Number of cycles in which more than one read beat starts on the R channel."""
    seen: dict[int, int] = {}
    for p in phases:
        if p.phase == BEG_RSP and p.beat >= 0:
            seen[p.cycle] = seen.get(p.cycle, 0) + 1
    return sum(1 for v in seen.values() if v > 1)


def phases_csv(phases: Sequence[ProtocolPhase]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cycle", "txn", "phase", "beat"])
    for p in sorted(phases):
        w.writerow([p.cycle, p.txn, p.phase, p.beat])
    return buf.getvalue()
