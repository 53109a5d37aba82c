"""Analytic performance estimation.

The proposed model walks every pass through its DMA intervals. Per data
type it derives the contiguous dataset size C and bursts per dataset Bc,
the time to move one dataset on its own (limited either by DRAM execution
or by the request round trip), a shared bandwidth for the set of DMACs
active together, and then the interval durations. Two baselines are
included: a fixed cost per element (one cycle, or scaled per data type).
"""

from __future__ import annotations

import bisect
import heapq
import json
from dataclasses import dataclass, field
from math import ceil
from typing import Optional, Sequence

from accsim.accelerator import AccelConfig
from accsim.bus import BusConfig
from accsim.dram import DramConfig
from accsim.memmap import DATA_TYPES, DataType, DramLayout, contiguous_datasets, split_into_bursts, tile_box
from accsim.workload import LayerShape, PassTile, TileConfig, compute_cycles, iter_passes, pass_amounts

DRAM_LIMITED = "dram_limited"
BUS_LIMITED = "bus_limited"


@dataclass(frozen=True)
class TypeBursts:
    """Step 1 result for one data type of one pass."""
    C: float  # elements per contiguous dataset
    Bc: float  # bursts per dataset
    lengths: tuple  # burst lengths of the first dataset
    P: int  # elements moved by the pass
    stream: tuple  # (bank, row, beats) of the leading bursts, in issue order
    stream_datasets: int  # datasets covered by ``stream``
    after: Optional[tuple]  # first burst following the stream, if any
    cols: float  # column commands per burst over the stream


@dataclass
class IntervalEstimate:
    active: tuple
    U: tuple
    P: tuple
    C: tuple
    Bc: tuple
    duration: float
    regime: str = DRAM_LIMITED

    @property
    def D(self) -> int:
        return len(self.active)


@dataclass
class EstimateReport:
    layer: LayerShape
    tile: TileConfig
    total_cycles: float
    per_pass_comm: list
    per_pass_compute: list
    model: str = "proposed"
    intervals: Optional[list] = None  # per pass, list of IntervalEstimate
    regime_counts: dict = field(default_factory=dict)

    @property
    def performance(self) -> float:
        return self.layer.ops / self.total_cycles

    @property
    def regime(self) -> str:
        n = sum(1 for c, p in zip(self.per_pass_comm, self.per_pass_compute) if c > p)
        return "comm_limited" if 2 * n > len(self.per_pass_comm) else "comp_limited"

    def to_dict(self) -> dict:
        per_pass = None
        if self.intervals is not None:
            per_pass = [{"pass": k, "intervals": [
                {"active": list(iv.active), "duration": round(iv.duration, 6), "regime": iv.regime,
                 "bandwidth": [round(u, 6) for u in iv.U]} for iv in ivs]}
                for k, ivs in enumerate(self.intervals)]
        return {
            "model": self.model,
            "layer": self.layer.to_dict(),
            "tile": self.tile.to_dict(),
            "total_cycles": round(self.total_cycles, 6),
            "performance": round(self.performance, 9),
            "regime": self.regime,
            "pass_count": len(self.per_pass_comm),
            "per_pass_comm": [round(c, 6) for c in self.per_pass_comm],
            "per_pass_compute": list(self.per_pass_compute),
            "per_pass": per_pass,
            "command_counts": None,
            "violations": None,
            "regime_counts": dict(self.regime_counts) if self.regime_counts else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


# Step 1 -------------------------------------------------------------------------

STREAM_BURSTS = 48  # bursts kept per type for the Step 2 timeline


def _ofm_view(p: PassTile) -> PassTile:
    if p.last_c:
        return p
    return PassTile(p.index, p.group, p.b0, p.tb, p.c0, p.tc, p.m0, p.tm, p.e0, p.te, p.f0, p.tf,
                    p.first_c, True)


def step1_burst_lengths(layer: LayerShape, tile: TileConfig, p: Optional[PassTile] = None,
                        dram_cfg: Optional[DramConfig] = None, max_burst_beats: int = 16,
                        layout: Optional[DramLayout] = None) -> dict:
    """C, Bc, burst lengths and a leading burst stream per data type of a pass.

    The first pass is used by default. For a pass that does not store its
    outputs the OFM entry describes the tile as it would be stored.
    """
    dram_cfg = dram_cfg or DramConfig()
    if p is None:
        p = next(iter_passes(layer, tile))
    if layout is None:
        layout = DramLayout(layer, dram_cfg.page_size)
    dbb = dram_cfg.dram_burst_beats
    out = {}
    for dt in DATA_TYPES:
        dss = contiguous_datasets(dt, layer, _ofm_view(p) if dt is DataType.OFM else p, layout)
        P = sum(d.length for d in dss)
        nb = 0
        stream = []
        covered = 0
        lengths = ()
        after = None
        for k, ds in enumerate(dss):
            bursts = split_into_bursts(ds, max_burst_beats, dram_cfg.page_size)
            if k == 0:
                lengths = tuple(b.beats for b in bursts)
            nb += len(bursts)
            if len(stream) < STREAM_BURSTS:
                covered += 1
                for b in bursts:
                    bank, row, _ = dram_cfg.decode(b.start_addr)
                    stream.append((bank, row, b.beats))
            elif after is None:
                bank, row, _ = dram_cfg.decode(bursts[0].start_addr)
                after = (bank, row, bursts[0].beats)
        n = len(dss)
        cols = sum(-(-b // dbb) for _, _, b in stream) / len(stream)
        out[dt] = TypeBursts(P / n, nb / n, lengths, P, tuple(stream), covered, after, cols)
    return out


# Steps 2 and 3 ------------------------------------------------------------------

def _replay(streams: Sequence[tuple], writes: Sequence[bool], dram_cfg: DramConfig,
            bus_cfg: BusConfig, quota: int = 32, log: Optional[list] = None) -> tuple[list[float], list[float]]:
    """Per-burst period of DMACs that repeat their burst streams side by side.

    Returns (periods, turn_share): cycles per completed burst for each
    stream in steady state, and the share of its bursts whose DRAM start was
    set by the request arriving rather than by a bank or the data bus.

    Each DMAC keeps ``max_outstanding`` bursts in flight and asks again when
    one completes; the address channel grants one request per cycle. Bursts
    are served in arrival order against per-bank row state and the N-column
    close; their column transfers are booked on the data bus at the earliest
    gap that respects the read/write turnaround, so later bursts can fill
    the activate and precharge gaps of earlier ones.
    Write data crosses the shared write channel before its column command;
    reads of one DMAC complete in order.
    """
    t = dram_cfg.timing
    tb, tcl = t.tBURST, t.tCL
    dbb, close_after = dram_cfg.dram_burst_beats, dram_cfg.close_after
    hs, lat, O = bus_cfg.handshake, bus_cfg.request_latency, bus_cfg.max_outstanding
    gap = bus_cfg.inter_request_gap
    turn_gap = tb if dram_cfg.turnaround else 0
    D = len(streams)
    banks = {}  # bank -> [row, act, next_pre, next_act, next_col, cols, opened by arrival]
    slots = []  # data-bus bookings (start, end, is_write)
    addr_free = w_free = 0
    seq = 0
    ev = []  # (time, order, seq, kind, payload); kind 0 = request, 1 = burst at the DRAM
    for k in range(O):
        for i in range(D):
            ev.append((0, 1, seq, 0, i))
            seq += 1
    heapq.heapify(ev)
    nxt = [0] * D
    last_issue = [-gap - 1] * D
    last_done = [0] * D
    done = [[] for _ in range(D)]
    by_req = [0] * D
    target = [max(quota, len(st)) + O for st in streams]
    while ev:
        now, _, _, kind, pl = heapq.heappop(ev)
        if kind == 0:
            i = pl
            if nxt[i] >= target[i]:
                continue
            g = max(now, addr_free, last_issue[i] + gap)
            if g > now:
                heapq.heappush(ev, (g, 1, seq, 0, i))
                seq += 1
                continue
            addr_free = g + 1
            last_issue[i] = g
            bank, row, beats = streams[i][nxt[i] % len(streams[i])]
            nxt[i] += 1
            w = writes[i]
            ws = 0
            if w:
                ws = max(g + hs, w_free)
                w_free = ws + beats
            a = g + hs + lat
            heapq.heappush(ev, (a, 1, seq, 1, [i, bank, row, beats, w, ws, a]))
            seq += 1
            continue
        i, bank, row, beats, w, ws, a = pl
        units = -(-beats // dbb)
        b = banks.get(bank)
        hit = b is not None and b[0] == row and b[5] + units <= close_after and a <= b[2]
        req_bound = True
        if hit:
            c = b[4]
            # a hit on a page opened by an idle-DRAM arrival belongs to that episode
            req_bound = a >= c or b[6]
        else:
            act = now
            if b is not None:
                act = max(now, b[3], b[2] + t.tRP)
            req_bound = act == a
            b = banks[bank] = [row, act, act + t.tRAS, act + t.tRC, act + t.tRCD, 0, req_bound]
            c = b[4]
        end = 0
        for u in range(units):
            if w:
                rd = ws + min((u + 1) * dbb, beats) + lat
                if c < rd:
                    c = rd
            slot = _fit(slots, c + tcl, tb, w, turn_gap)
            if slot > c + tcl:
                req_bound = False
            c = slot - tcl
            if log is not None:
                log.append((c, i, bank, row, a))
            b[4] = c + tb
            b[2] = max(b[2], c + (tcl + tb if w else tb))
            b[5] += 1
            end = c + tcl + tb + hs if w else c + tcl + min(dbb, beats - u * dbb)
            c += tb
        if len(slots) > 64:
            del slots[:32]
        if not w:
            end = max(end, last_done[i])
            last_done[i] = end
        by_req[i] += req_bound
        done[i].append(end)
        heapq.heappush(ev, (end, 1, seq, 0, i))
        seq += 1
    t_end = min(max(d) for d in done)
    t_w = max(sorted(d)[min(O, len(d)) - 1] for d in done)
    periods = []
    for i in range(D):
        n = sum(1 for x in done[i] if t_w < x <= t_end)
        periods.append((t_end - t_w) / n if n and t_end > t_w else max(done[i]) / len(done[i]))
    return periods, [r / n for r, n in zip(by_req, nxt)]


def _fit(slots: list, t: int, length: int, w: bool, turn: int) -> int:
    """Earliest start >= t for a data-bus transfer between the booked slots."""
    k = bisect.bisect_left(slots, (t,))
    if k > 0:
        s0, e0, w0 = slots[k - 1]
        lo = e0 + (turn if w0 != w else 0)
        if t < lo:
            t = lo
    while k < len(slots):
        s1, e1, w1 = slots[k]
        if t + length + (turn if w1 != w else 0) <= s1:
            break
        t = max(t, e1 + (turn if w1 != w else 0))
        k += 1
    slots.insert(k, (t, t + length, w))
    return t


def _mean_beats(stream) -> float:
    return sum(x[2] for x in stream) / len(stream)


def step2_dataset_duration(tb: TypeBursts, dram_cfg: Optional[DramConfig] = None,
                           bus_cfg: Optional[BusConfig] = None, is_write: bool = False) -> tuple[str, float]:
    """(regime, cycles) to move one contiguous dataset with a single active DMAC.

    The dataset is bus-limited when most of its bursts start in DRAM as soon
    as their request arrives, so the request round trip sets the pace.
    """
    dram_cfg = dram_cfg or DramConfig()
    bus_cfg = bus_cfg or BusConfig()
    (per,), (share,) = _replay((tb.stream,), (is_write,), dram_cfg, bus_cfg)
    regime = BUS_LIMITED if share > 0.5 else DRAM_LIMITED
    return regime, per * tb.Bc


def step3_bandwidth(tbs: Sequence[TypeBursts], writes: Sequence[bool], dram_cfg: Optional[DramConfig] = None,
                    bus_cfg: Optional[BusConfig] = None) -> list[float]:
    """Per-DMAC bandwidth (elements per cycle) of DMACs active together."""
    dram_cfg = dram_cfg or DramConfig()
    bus_cfg = bus_cfg or BusConfig()
    periods, _ = _replay(tuple(t.stream for t in tbs), tuple(writes), dram_cfg, bus_cfg)
    return [min(1.0, _mean_beats(t.stream) / p) for t, p in zip(tbs, periods)]


# Step 4 -------------------------------------------------------------------------

def step4_interval_duration(U: Sequence[float], P: Sequence[float], C: Sequence[int],
                            Bc: Sequence[int]) -> tuple[float, list[float]]:
    """Duration of one DMA interval and the remaining amounts after it.

    Remaining amounts are compared in bursts, as all active DMACs send the
    same number of bursts; the interval ends when the DMAC with the fewest
    remaining bursts is done.
    """
    D = len(U)
    if not (len(P) == len(C) == len(Bc) == D) or D == 0:
        raise ValueError("U, P, C and Bc must have the same non-zero length")
    if any(p <= 0 for p in P):
        raise ValueError("inactive DMAC (P <= 0) passed to step4")
    R = [P[i] / C[i] * Bc[i] for i in range(D)]
    m = min(R)
    A = [m / Bc[i] * C[i] for i in range(D)]
    duration = max(A[i] / U[i] for i in range(D))
    return duration, [P[i] - A[i] for i in range(D)]


# full model ---------------------------------------------------------------------

class _Walk:
    """Fluid progress of the three DMACs between start events.

    Active transfers advance interval by interval: step-4 durations from
    the bandwidths of the current active set, cut short when another
    transfer starts.
    """

    def __init__(self, model: "_Model"):
        self.m = model
        self.t = 0.0
        self.active: dict = {}  # dt -> [remaining, key, tag]
        self.starts: list = []  # (time, seq, dt, amount, key, tag), heap
        self.done_at: dict = {}  # tag -> finish time
        self.log: Optional[list] = None
        self._seq = 0

    def add(self, time: float, dt: DataType, amount: float, key, tag) -> None:
        if amount <= 0:
            self.done_at[tag] = time
            return
        heapq.heappush(self.starts, (time, self._seq, dt, amount, key, tag))
        self._seq += 1

    def _admit(self) -> None:
        keep = []
        while self.starts and self.starts[0][0] <= self.t + _EPS:
            item = heapq.heappop(self.starts)
            if item[2] in self.active:
                keep.append(item)  # the DMAC is still busy with an earlier command
            else:
                self.active[item[2]] = [item[3], item[4], item[5]]
        for item in keep:
            heapq.heappush(self.starts, item)

    def _next_start(self) -> float:
        for time, _, dt, *_ in sorted(self.starts):
            if dt not in self.active:
                return max(time, self.t)
        return _INF

    def run(self, until=None, tags=()) -> None:
        """Advance until time ``until`` or until every tag in ``tags`` is done."""
        tags = [x for x in tags if x not in self.done_at]
        while True:
            self._admit()
            tags = [x for x in tags if x not in self.done_at]
            if until is None and not tags:
                return
            if until is not None and self.t >= until - _EPS:
                self.t = max(self.t, until)
                return
            nxt = self._next_start()
            if until is not None:
                nxt = min(nxt, until)
            if not self.active:
                if nxt == _INF:
                    raise RuntimeError("estimate walk has nothing left to wait for")
                self.t = nxt
                continue
            dts = [dt for dt in DATA_TYPES if dt in self.active]
            keys = tuple((dt, self.active[dt][1]) for dt in dts)
            U, regime = self.m.bandwidth(keys)
            tbs = [self.m.bursts(k) for k in keys]
            P = [self.active[dt][0] for dt in dts]
            dur, left = step4_interval_duration(U, P, [b.C for b in tbs], [b.Bc for b in tbs])
            if self.t + dur > nxt:
                dur = nxt - self.t
                left = [max(0.0, p - u * dur) for p, u in zip(P, U)]
            if self.log is not None:
                self.log.append(IntervalEstimate(tuple(dt.value for dt in dts), tuple(U), tuple(P),
                                                 tuple(b.C for b in tbs), tuple(b.Bc for b in tbs), dur, regime))
            self.t += dur
            for dt, r in zip(dts, left):
                if r <= _EPS * max(1.0, self.active[dt][0]):
                    self.done_at[self.active.pop(dt)[2]] = self.t
                else:
                    self.active[dt][0] = r


_EPS = 1e-9
_INF = float("inf")


class _Model:
    """Memoized Step 1-3 results keyed by tile-box extents."""

    def __init__(self, layer, tile, bus_cfg, dram_cfg, accel_cfg):
        self.layer, self.tile = layer, tile
        self.bus_cfg, self.dram_cfg, self.accel_cfg = bus_cfg, dram_cfg, accel_cfg
        self.layout = DramLayout(layer, dram_cfg.page_size)
        self._bursts: dict = {}
        self._bw: dict = {}

    def key(self, dt: DataType, p: PassTile):
        k = (dt, tile_box(dt, self.layer, _ofm_view(p) if dt is DataType.OFM else p)[1])
        if k not in self._bursts:
            self._bursts[k] = step1_burst_lengths(self.layer, self.tile, p, self.dram_cfg,
                                                  self.accel_cfg.max_burst_beats, self.layout)[dt]
        return k[1]

    def bursts(self, dk) -> TypeBursts:
        return self._bursts[dk]

    def bandwidth(self, keys: tuple):
        hit = self._bw.get(keys)
        if hit is None:
            tbs = [self._bursts[k] for k in keys]
            writes = [k[0].is_write for k in keys]
            periods, shares = _replay(tuple(b.stream for b in tbs), tuple(writes), self.dram_cfg, self.bus_cfg)
            U = [min(1.0, _mean_beats(b.stream) / per) for b, per in zip(tbs, periods)]
            regime = BUS_LIMITED if 2 * sum(shares) > len(shares) else DRAM_LIMITED
            hit = self._bw[keys] = (U, regime)
        return hit


def estimate(layer: LayerShape, tile: TileConfig, bus_cfg: Optional[BusConfig] = None,
             dram_cfg: Optional[DramConfig] = None, accel_cfg: Optional[AccelConfig] = None,
             keep_intervals: bool = False) -> EstimateReport:
    """Proposed model: walk every pass through its DMA intervals.

    The pipeline follows the accelerator: the load window of pass k opens
    when pass k-1 starts computing, IFM and W start after the setup and
    stagger delays, output tiles are stored from the end of their last
    input-channel pass, and an output buffer is reused only after its
    previous tile has been stored.
    """
    bus_cfg = bus_cfg or BusConfig()
    dram_cfg = dram_cfg or DramConfig()
    accel_cfg = accel_cfg or AccelConfig()
    tile.validate(layer)
    m = _Model(layer, tile, bus_cfg, dram_cfg, accel_cfg)
    walk = _Walk(m)
    passes = list(iter_passes(layer, tile))
    comm, comp, ivs = [], [], []
    regimes: dict = {}
    prev_end = 0.0
    win = 0.0
    ofm_tag = {}
    finish = 0.0
    for k, p in enumerate(passes):
        if keep_intervals:
            walk.log = []
        ifm, w, ofm = pass_amounts(layer, p)
        walk.add(win + accel_cfg.setup_cycles, DataType.IFM, ifm, m.key(DataType.IFM, p), ("in", k))
        walk.add(win + accel_cfg.setup_cycles + accel_cfg.stagger_cycles, DataType.W, w,
                 m.key(DataType.W, p), ("w", k))
        walk.run(tags=[("in", k), ("w", k)])
        comm_end = max(walk.done_at[("in", k)], walk.done_at[("w", k)])
        start = max(comm_end, prev_end)
        if p.first_c and p.group >= 2:
            walk.run(tags=[ofm_tag[p.group - 2]])
            start = max(start, walk.done_at[ofm_tag[p.group - 2]])
        walk.run(until=start)
        if keep_intervals:
            ivs.append(walk.log)
            for iv in walk.log:
                regimes[iv.regime] = regimes.get(iv.regime, 0) + 1
        cyc = compute_cycles(layer, tile, p.tb, p.tc, p.tm, p.te, p.tf, accel_cfg.fill_cycles)
        comm.append(comm_end - win)
        comp.append(cyc)
        prev_end = start + cyc
        if p.last_c:
            ofm_tag[p.group] = ("out", p.group)
            walk.add(prev_end, DataType.OFM, ofm, m.key(DataType.OFM, p), ofm_tag[p.group])
        win = start
    walk.log = None
    walk.run(tags=list(ofm_tag.values()))
    finish = max(prev_end, max((walk.done_at[t] for t in ofm_tag.values()), default=0.0))
    return EstimateReport(layer, tile, finish, comm, comp, "proposed", ivs if keep_intervals else None, regimes)


CONVENTIONAL = (1.0, 1.0, 1.0)
SCALED_UNIFORM = (1.75, 1.75, 1.75)
SCALED_PER_TYPE = (1.6, 2.7, 1.0)


def estimate_conventional(layer: LayerShape, tile: TileConfig, scale: Sequence[float] = CONVENTIONAL,
                          accel_cfg: Optional[AccelConfig] = None) -> EstimateReport:
    """Fixed cycles per element for IFM, W and OFM (one each by default).

    The load of pass k+1, together with the store of pass k, overlaps the
    computation of pass k; each step lasts the longer of the two.
    """
    if len(scale) != 3 or any(x <= 0 for x in scale):
        raise ValueError("scale needs three positive cycles-per-element values")
    accel_cfg = accel_cfg or AccelConfig()
    tile.validate(layer)
    s_in, s_w, s_out = scale
    comm, comp, stores = [], [], []
    for p in iter_passes(layer, tile):
        ifm, w, ofm = pass_amounts(layer, p)
        comm.append(s_in * ifm + s_w * w)
        stores.append(s_out * ofm)
        comp.append(compute_cycles(layer, tile, p.tb, p.tc, p.tm, p.te, p.tf, accel_cfg.fill_cycles))
    n = len(comm)
    total = comm[0]
    for k in range(n):
        nxt = comm[k + 1] if k + 1 < n else 0.0
        total += max(comp[k], nxt + stores[k])
    if scale == CONVENTIONAL:
        name = "conventional"
    else:
        name = "scaled"
    return EstimateReport(layer, tile, total, comm, comp, name)
