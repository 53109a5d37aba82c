"""Run configuration files (YAML) for the command line."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import yaml

from accsim.accelerator import AccelConfig
from accsim.bus import BusConfig
from accsim.dram import DramConfig
from accsim.dse import DesignSpace, desk_space, reference_space
from accsim.workload import LayerShape, TileConfig, preset

SCHEMA_VERSION = 1
SPACES = {"reference": reference_space, "desk": desk_space}


class ConfigFileError(ValueError):
    pass


@dataclass
class RunConfig:
    layers: list = field(default_factory=lambda: ["alexnet-conv3"])  # preset names or layer dicts
    tile: Optional[TileConfig] = None
    space: Optional[DesignSpace] = None
    bus: BusConfig = field(default_factory=BusConfig)
    dram: DramConfig = field(default_factory=DramConfig)
    accel: AccelConfig = field(default_factory=AccelConfig)
    sram_budget: Optional[int] = None
    output_dir: str = "out"
    traces: list = field(default_factory=list)  # any of dram, bus, passes
    model: str = "proposed"
    scale: Optional[list] = None
    evaluator: str = "estimate"
    top_fraction: Optional[float] = None
    unroll_set: Optional[list] = None  # [[UM, UC], ...] for multi-layer runs
    workers: int = 1
    schema_version: int = SCHEMA_VERSION

    def layer_shapes(self) -> list[LayerShape]:
        out = []
        for item in self.layers:
            if isinstance(item, str):
                out.append(preset(item))
            else:
                out.append(LayerShape.from_dict(item))
        return out

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "layers": list(self.layers),
            "tile": self.tile.to_dict() if self.tile is not None else None,
            "space": self.space.to_dict() if self.space is not None else None,
            "bus": self.bus.to_dict(),
            "dram": self.dram.to_dict(),
            "accel": self.accel.to_dict(),
            "sram_budget": self.sram_budget,
            "output_dir": self.output_dir,
            "traces": list(self.traces),
            "model": self.model,
            "scale": list(self.scale) if self.scale is not None else None,
            "evaluator": self.evaluator,
            "top_fraction": self.top_fraction,
            "unroll_set": [list(u) for u in self.unroll_set] if self.unroll_set is not None else None,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigFileError("config must be a mapping")
        d = dict(d)
        version = d.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigFileError(f"unsupported schema_version {version}")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigFileError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            tile = d.pop("tile", None)
            space = d.pop("space", None)
            if isinstance(space, str):
                if space not in SPACES:
                    raise ConfigFileError(f"unknown space preset {space!r}")
                space = SPACES[space]()
            elif space is not None:
                space = DesignSpace.from_dict(space)
            cfg = cls(
                tile=TileConfig.from_dict(tile) if tile is not None else None,
                space=space,
                bus=BusConfig(**d.pop("bus", {})),
                dram=DramConfig.from_dict(d.pop("dram", {})),
                accel=AccelConfig(**d.pop("accel", {})),
                **d,
            )
            cfg.layer_shapes()
        except ConfigFileError:
            raise
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigFileError(str(e)) from e
        return cfg

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigFileError(f"not valid YAML: {e}") from e
        return cls.from_dict(data or {})

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as f:
            return cls.loads(f.read())
