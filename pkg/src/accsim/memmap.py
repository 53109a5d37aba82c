"""DRAM data layout, contiguous datasets and burst/command expansion.

Feature maps are stored row-major per channel, channels after each other,
images after each other. Filters are stored as planes r*s, input channel
next, output channel outermost. Each data type lives in its own
page-aligned region.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from math import prod
from typing import Iterable, Optional, Sequence

from accsim.workload import LayerShape, PassTile, input_window


class AddressError(IndexError):
    pass


class DataType(str, enum.Enum):
    IFM = "IFM"
    W = "W"
    OFM = "OFM"

    @property
    def is_write(self) -> bool:
        return self is DataType.OFM


DATA_TYPES = (DataType.IFM, DataType.W, DataType.OFM)


@dataclass(frozen=True)
class ContiguousDataset:
    start_addr: int
    length: int
    data_type: DataType
    dataset_id: int = 0


@dataclass(frozen=True, slots=True)
class BurstRequest:
    dataset_id: int
    start_addr: int
    beats: int
    direction: str  # "read" | "write"
    issuing_dmac: DataType

    @property
    def is_write(self) -> bool:
        return self.direction == "write"


@dataclass(frozen=True)
class DramCommandCount:
    activates: int = 0
    column_cmds: int = 0
    precharges: int = 0

    @property
    def total(self) -> int:
        return self.activates + self.column_cmds + self.precharges

    def __add__(self, other: "DramCommandCount") -> "DramCommandCount":
        return DramCommandCount(self.activates + other.activates,
                                self.column_cmds + other.column_cmds,
                                self.precharges + other.precharges)


def region_shape(data_type: DataType, layer: LayerShape) -> tuple[int, int, int, int]:
    if data_type is DataType.IFM:
        return (layer.B, layer.C, layer.H, layer.W)
    if data_type is DataType.W:
        return (layer.M, layer.C, layer.R, layer.S)
    return (layer.B, layer.M, layer.E, layer.F)


def element_address(data_type: DataType, indices: Sequence[int], layer: LayerShape) -> int:
    """Region-local address of one element.

    IFM (b, c, h, w), W (m, c, r, s), OFM (b, m, e, f).
    """
    dims = region_shape(DataType(data_type), layer)
    if len(indices) != 4:
        raise AddressError(f"expected 4 indices, got {len(indices)}")
    addr = 0
    for i, n in zip(indices, dims):
        if not 0 <= i < n:
            raise AddressError(f"index {tuple(indices)} outside {dims}")
        addr = addr * n + i
    return addr


class DramLayout:
    """Base addresses of the three data regions, each page aligned."""

    def __init__(self, layer: LayerShape, page_size: int = 1024):
        self.layer = layer
        self.page_size = page_size
        self.base = {}
        cursor = 0
        for dt in DATA_TYPES:
            self.base[dt] = cursor
            size = prod(region_shape(dt, layer))
            cursor += -(-size // page_size) * page_size

    def address(self, data_type: DataType, indices: Sequence[int]) -> int:
        return self.base[data_type] + element_address(data_type, indices, self.layer)


def box_runs(dims: Sequence[int], origin: Sequence[int], extent: Sequence[int],
             floor: int = 0) -> list[tuple[int, int]]:
    """Maximal contiguous runs of a box inside a row-major array, in access order.

    Inner dimensions covered completely merge with the next outer one; the
    first partially covered dimension (from the inside) bounds the run.
    Runs never merge across dimension ``floor`` or any outer one.
    """
    n = len(dims)
    j = n - 1
    while j > floor and extent[j] == dims[j] and origin[j] == 0:
        j -= 1
    run = prod(extent[j:])
    strides = [prod(dims[i + 1:]) for i in range(n)]
    base = sum(o * s for o, s in zip(origin, strides))
    starts = [base]
    for i in range(j - 1, -1, -1):
        step = strides[i]
        starts = [s + k * step for k in range(extent[i]) for s in starts]
    starts.sort()
    return [(s, run) for s in starts]


# A dataset never spans two feature-map planes or two filters: the DMA
# walks one plane (b, c) or one filter (m) at a time.
MERGE_FLOOR = {DataType.IFM: 2, DataType.W: 1, DataType.OFM: 2}


def tile_box(data_type: DataType, layer: LayerShape, p: PassTile) -> tuple[tuple, tuple]:
    """(origin, extent) of the pass tile inside the data type's region."""
    if data_type is DataType.IFM:
        h0, rows = input_window(p.e0, p.te, layer.stride, layer.R, layer.padding, layer.H)
        w0, cols = input_window(p.f0, p.tf, layer.stride, layer.S, layer.padding, layer.W)
        return (p.b0, p.c0, h0, w0), (p.tb, p.tc, rows, cols)
    if data_type is DataType.W:
        return (p.m0, p.c0, 0, 0), (p.tm, p.tc, layer.R, layer.S)
    return (p.b0, p.m0, p.e0, p.f0), (p.tb, p.tm, p.te, p.tf)


def contiguous_datasets(data_type: DataType, layer: LayerShape, p: PassTile,
                        layout: Optional[DramLayout] = None) -> list[ContiguousDataset]:
    """Datasets accessed by one pass for one data type, with global addresses."""
    data_type = DataType(data_type)
    if layout is None:
        layout = DramLayout(layer)
    origin, extent = tile_box(data_type, layer, p)
    base = layout.base[data_type]
    runs = box_runs(region_shape(data_type, layer), origin, extent, MERGE_FLOOR[data_type])
    return [ContiguousDataset(base + s, n, data_type, i) for i, (s, n) in enumerate(runs)]


def merge_runs(addresses: Iterable[int]) -> list[tuple[int, int]]:
    """Merge an address sequence (in access order) into maximal consecutive runs."""
    runs: list[list[int]] = []
    for a in addresses:
        if runs and a == runs[-1][0] + runs[-1][1]:
            runs[-1][1] += 1
        else:
            runs.append([a, 1])
    return [(s, n) for s, n in runs]


def split_into_bursts(ds: ContiguousDataset, max_burst_beats: int = 16,
                      page_size: Optional[int] = 1024) -> list[BurstRequest]:
    """Greedy split: full bursts first, remainder last, never crossing a page edge."""
    if max_burst_beats < 1:
        raise ValueError("max_burst_beats must be >= 1")
    direction = "write" if ds.data_type.is_write else "read"
    out = []
    addr, left = ds.start_addr, ds.length
    while left:
        n = min(max_burst_beats, left)
        if page_size:
            n = min(n, page_size - addr % page_size)
        out.append(BurstRequest(ds.dataset_id, addr, n, direction, ds.data_type))
        addr += n
        left -= n
    return out


def expand_to_dram_commands(bursts: Sequence[BurstRequest], dram_cfg=None,
                            outstanding_group: int = 2) -> DramCommandCount:
    """Count ACT/column/PRE commands for bursts served in outstanding groups.

    Each group of consecutive bursts shares page openings; a page is closed
    after `close_after` column commands and at the end of the group.
    """
    if dram_cfg is None:
        from accsim.dram import DramConfig
        dram_cfg = DramConfig()
    page, nbanks = dram_cfg.page_size, dram_cfg.n_banks
    dbb, close_after = dram_cfg.dram_burst_beats, dram_cfg.close_after
    act = col = pre = 0
    for g in range(0, len(bursts), outstanding_group):
        open_rows: dict[int, list[int]] = {}  # bank -> [row, col count]
        for b in bursts[g:g + outstanding_group]:
            pg = b.start_addr // page
            bank, row = pg % nbanks, pg // nbanks
            for _ in range(-(-b.beats // dbb)):
                st = open_rows.get(bank)
                if st is not None and st[0] != row:
                    pre += 1
                    st = None
                if st is None:
                    act += 1
                    st = open_rows[bank] = [row, 0]
                col += 1
                st[1] += 1
                if st[1] == close_after:
                    pre += 1
                    del open_rows[bank]
        pre += len(open_rows)
    return DramCommandCount(act, col, pre)


def command_counts_csv(rows: Iterable[tuple[int, DramCommandCount]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset_id", "activates", "column_cmds", "precharges"])
    for ds_id, c in rows:
        w.writerow([ds_id, c.activates, c.column_cmds, c.precharges])
    return buf.getvalue()
