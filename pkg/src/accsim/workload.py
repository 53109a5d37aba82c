"""Layer and tile arithmetic for the tiled no-local-reuse dataflow.

Everything here is a pure function of the layer shape and tiling
parameters: pass decomposition, per-pass transfer amounts, MAC-array
timing and on-chip buffer footprint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

PIPELINE_FILL_CYCLES = 8


class DimensionError(ValueError):
    pass


class TileError(ValueError):
    pass


def derive_output_dims(H: int, W: int, R: int, S: int, stride: int = 1, padding: int = 0) -> tuple[int, int]:
    """Output height/width of a 'valid' (optionally zero-padded) convolution."""
    if min(H, W, R, S, stride) < 1 or padding < 0:
        raise DimensionError("dimensions must be positive")
    span_h = H + 2 * padding - R
    span_w = W + 2 * padding - S
    if span_h < 0 or span_w < 0:
        raise DimensionError(f"filter {R}x{S} larger than input {H}x{W}")
    if span_h % stride or span_w % stride:
        raise DimensionError(f"({H}-{R}) / {stride} or ({W}-{S}) / {stride} is not an integer")
    return span_h // stride + 1, span_w // stride + 1


@dataclass(frozen=True)
class LayerShape:
    B: int
    C: int
    M: int
    H: int
    W: int
    R: int
    S: int
    E: int
    F: int
    stride: int = 1
    padding: int = 0
    name: str = ""

    def __post_init__(self):
        for k in ("B", "C", "M", "H", "W", "R", "S", "E", "F", "stride"):
            if getattr(self, k) < 1:
                raise DimensionError(f"{k} must be >= 1")
        if (self.E, self.F) != derive_output_dims(self.H, self.W, self.R, self.S, self.stride, self.padding):
            raise DimensionError(f"inconsistent output dims E={self.E}, F={self.F}")

    @classmethod
    def conv(cls, B, C, M, H, W, R, S, stride=1, padding=0, name=""):
        E, F = derive_output_dims(H, W, R, S, stride, padding)
        return cls(B, C, M, H, W, R, S, E, F, stride, padding, name)

    @property
    def macs(self) -> int:
        return self.B * self.C * self.M * self.E * self.F * self.R * self.S

    @property
    def ops(self) -> int:
        # one MAC = multiply + add
        return 2 * self.macs

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("B", "C", "M", "H", "W", "R", "S", "stride", "padding")}
        if self.name:
            d["name"] = self.name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerShape":
        d = dict(d)
        E, F = d.pop("E", None), d.pop("F", None)
        layer = cls.conv(**d)
        if E is not None and (E, F) != (layer.E, layer.F):
            raise DimensionError(f"inconsistent output dims E={E}, F={F}")
        return layer


@dataclass(frozen=True, order=True)
class TileConfig:
    TB: int
    TC: int
    TM: int
    TE: int
    TF: int
    UM: Optional[int] = None
    UC: Optional[int] = None

    def __post_init__(self):
        if self.UM is None:
            object.__setattr__(self, "UM", self.TM)
        if self.UC is None:
            object.__setattr__(self, "UC", self.TC)
        for k in ("TB", "TC", "TM", "TE", "TF", "UM", "UC"):
            if getattr(self, k) < 1:
                raise TileError(f"{k} must be >= 1")
        if self.TM % self.UM or self.TC % self.UC:
            raise TileError(f"unroll ({self.UM},{self.UC}) must divide tile ({self.TM},{self.TC})")

    @property
    def constrained(self) -> bool:
        return self.UM == self.TM and self.UC == self.TC

    @property
    def macs_per_cycle(self) -> int:
        return self.UM * self.UC

    def validate(self, layer: LayerShape, constrained: bool = False) -> None:
        for t, n, dim in ((self.TB, layer.B, "B"), (self.TC, layer.C, "C"), (self.TM, layer.M, "M"),
                          (self.TE, layer.E, "E"), (self.TF, layer.F, "F")):
            if t > n:
                raise TileError(f"T{dim}={t} exceeds {dim}={n}")
        if constrained and not self.constrained:
            raise TileError("constrained mode requires UM=TM and UC=TC")

    def key(self) -> tuple:
        return (self.TB, self.TC, self.TM, self.TE, self.TF, self.UM, self.UC)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("TB", "TC", "TM", "TE", "TF", "UM", "UC")}

    @classmethod
    def from_dict(cls, d: dict) -> "TileConfig":
        return cls(**{k: d[k] for k in ("TB", "TC", "TM", "TE", "TF") }, UM=d.get("UM"), UC=d.get("UC"))

    def __str__(self):
        s = f"TB={self.TB} TC={self.TC} TM={self.TM} TE={self.TE} TF={self.TF}"
        if not self.constrained:
            s += f" UM={self.UM} UC={self.UC}"
        return s


@dataclass(frozen=True)
class PassPlan:
    pass_count: int
    ifm_pixels_per_pass: int
    w_weights_per_pass: int
    ofm_pixels_per_store: int
    ofm_store_period: int
    compute_cycles_per_pass: int


@dataclass(frozen=True)
class PassTile:
    """One processing pass: tile origin and clamped extent in every dimension."""
    index: int
    group: int
    b0: int
    tb: int
    c0: int
    tc: int
    m0: int
    tm: int
    e0: int
    te: int
    f0: int
    tf: int
    first_c: bool
    last_c: bool


def _ceil(a: int, b: int) -> int:
    return -(-a // b)


def input_window(o0: int, t: int, stride: int, K: int, pad: int, N: int) -> tuple[int, int]:
    """Input rows/cols [start, start+len) read by outputs o0..o0+t-1, clipped to the map."""
    lo = o0 * stride - pad
    hi = (o0 + t - 1) * stride - pad + K
    lo, hi = max(lo, 0), min(hi, N)
    return lo, hi - lo


def ifm_tile_pixels(layer: LayerShape, tb: int, tc: int, te: int, tf: int) -> int:
    """IFM tile size for an interior tile (no padding clipping)."""
    return tb * tc * ((te - 1) * layer.stride + layer.R) * ((tf - 1) * layer.stride + layer.S)


def w_tile_weights(layer: LayerShape, tc: int, tm: int) -> int:
    return tc * tm * layer.R * layer.S


def ofm_tile_pixels(tb: int, tm: int, te: int, tf: int) -> int:
    return tb * tm * te * tf


def compute_cycles(layer: LayerShape, tile: TileConfig, tb: int, tc: int, tm: int, te: int, tf: int,
                   fill: int = PIPELINE_FILL_CYCLES) -> int:
    """MAC-array cycles for one pass: one intra-pass iteration per cycle."""
    return layer.R * layer.S * tb * te * tf * _ceil(tc, tile.UC) * _ceil(tm, tile.UM) + fill


def plan_passes(layer: LayerShape, tile: TileConfig, fill: int = PIPELINE_FILL_CYCLES) -> PassPlan:
    tile.validate(layer)
    count = (_ceil(layer.B, tile.TB) * _ceil(layer.C, tile.TC) * _ceil(layer.M, tile.TM)
             * _ceil(layer.E, tile.TE) * _ceil(layer.F, tile.TF))
    return PassPlan(
        pass_count=count,
        ifm_pixels_per_pass=ifm_tile_pixels(layer, tile.TB, tile.TC, tile.TE, tile.TF),
        w_weights_per_pass=w_tile_weights(layer, tile.TC, tile.TM),
        ofm_pixels_per_store=ofm_tile_pixels(tile.TB, tile.TM, tile.TE, tile.TF),
        ofm_store_period=_ceil(layer.C, tile.TC),
        compute_cycles_per_pass=compute_cycles(layer, tile, tile.TB, tile.TC, tile.TM, tile.TE, tile.TF, fill),
    )


def iter_passes(layer: LayerShape, tile: TileConfig) -> Iterator[PassTile]:
    """Across-tile loop nest b, e, f, m, c (c innermost so partial sums stay on chip)."""
    idx = 0
    group = 0
    nc = _ceil(layer.C, tile.TC)
    for b0 in range(0, layer.B, tile.TB):
        tb = min(tile.TB, layer.B - b0)
        for e0 in range(0, layer.E, tile.TE):
            te = min(tile.TE, layer.E - e0)
            for f0 in range(0, layer.F, tile.TF):
                tf = min(tile.TF, layer.F - f0)
                for m0 in range(0, layer.M, tile.TM):
                    tm = min(tile.TM, layer.M - m0)
                    for ci, c0 in enumerate(range(0, layer.C, tile.TC)):
                        tc = min(tile.TC, layer.C - c0)
                        yield PassTile(idx, group, b0, tb, c0, tc, m0, tm, e0, te, f0, tf,
                                       ci == 0, ci == nc - 1)
                        idx += 1
                    group += 1


def pass_amounts(layer: LayerShape, p: PassTile) -> tuple[int, int, int]:
    """(IFM pixels, weights, OFM pixels stored after this pass) with edge clamping."""
    _, rows = input_window(p.e0, p.te, layer.stride, layer.R, layer.padding, layer.H)
    _, cols = input_window(p.f0, p.tf, layer.stride, layer.S, layer.padding, layer.W)
    ifm = p.tb * p.tc * rows * cols
    w = p.tc * p.tm * layer.R * layer.S
    ofm = p.tb * p.tm * p.te * p.tf if p.last_c else 0
    return ifm, w, ofm


def layer_traffic(layer: LayerShape, tile: TileConfig) -> dict[str, int]:
    """Total elements moved per data type over the whole layer."""
    tot = {"IFM": 0, "W": 0, "OFM": 0}
    for p in iter_passes(layer, tile):
        i, w, o = pass_amounts(layer, p)
        tot["IFM"] += i
        tot["W"] += w
        tot["OFM"] += o
    return tot


def buffer_footprint(layer: LayerShape, tile: TileConfig) -> int:
    """On-chip SRAM elements; double buffering doubles every tile buffer."""
    ifm = ifm_tile_pixels(layer, tile.TB, tile.TC, tile.TE, tile.TF)
    return 2 * (ifm + w_tile_weights(layer, tile.TC, tile.TM) + ofm_tile_pixels(tile.TB, tile.TM, tile.TE, tile.TF))


# Layer presets (AlexNet, single image unless overridden)
def alexnet_conv1(B: int = 1) -> LayerShape:
    return LayerShape.conv(B, 3, 96, 227, 227, 11, 11, stride=4, name="alexnet-conv1")


def alexnet_conv3(B: int = 1) -> LayerShape:
    return LayerShape.conv(B, 256, 384, 15, 15, 3, 3, stride=1, name="alexnet-conv3")


def alexnet_conv4(B: int = 1) -> LayerShape:
    return LayerShape.conv(B, 384, 384, 15, 15, 3, 3, stride=1, name="alexnet-conv4")


def alexnet_conv5(B: int = 1) -> LayerShape:
    return LayerShape.conv(B, 384, 256, 15, 15, 3, 3, stride=1, name="alexnet-conv5")


PRESETS = {
    "alexnet-conv1": alexnet_conv1,
    "alexnet-conv3": alexnet_conv3,
    "alexnet-conv4": alexnet_conv4,
    "alexnet-conv5": alexnet_conv5,
}


def preset(name: str, B: int = 1) -> LayerShape:
    try:
        return PRESETS[name](B)
    except KeyError:
        raise DimensionError(f"unknown layer preset {name!r}") from None
