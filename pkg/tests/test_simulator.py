import pytest

from accsim.accelerator import AccelConfig
from accsim.bus import BusConfig
from accsim.dram import DramConfig, DramTiming
from accsim.simulator import ConfigError, TraceUnavailable, emit_trace, simulate
from accsim.workload import LayerShape, TileConfig, alexnet_conv3, buffer_footprint

SMALL = LayerShape.conv(1, 12, 12, 12, 12, 3, 3)
CASES = [
    (SMALL, TileConfig(1, 3, 4, 5, 5)),
    (SMALL, TileConfig(1, 12, 12, 10, 10)),
    (LayerShape.conv(2, 5, 7, 9, 9, 3, 3, padding=1), TileConfig(2, 2, 3, 4, 9)),
    (LayerShape.conv(1, 8, 16, 17, 17, 3, 3, stride=2), TileConfig(1, 4, 8, 3, 8, UM=4, UC=2)),
]


@pytest.mark.parametrize("layer,tile", CASES)
def test_fast_engine_matches_event_engine(layer, tile):
    a = simulate(layer, tile, engine="event")
    b = simulate(layer, tile, engine="fast")
    assert a.total_cycles == b.total_cycles
    assert a.command_counts == b.command_counts
    assert [t.to_dict() for t in a.per_pass] == [t.to_dict() for t in b.per_pass]
    assert a.violations == b.violations == []


@pytest.mark.parametrize("bus,dram", [
    (BusConfig(max_outstanding=4, request_latency=9), DramConfig()),
    (BusConfig(max_outstanding=1), DramConfig(close_after=2, n_banks=4)),
    (BusConfig(), DramConfig(timing=DramTiming(tRCD=14, tRP=12, tCL=11, tRC=30), turnaround=False)),
])
def test_engines_agree_on_other_configs(bus, dram):
    layer, tile = CASES[2]
    a = simulate(layer, tile, bus, dram, engine="event")
    b = simulate(layer, tile, bus, dram, engine="fast")
    assert a.total_cycles == b.total_cycles
    assert a.command_counts == b.command_counts


def test_checked_run_is_clean():
    rep = simulate(*CASES[0], check=True)
    assert rep.violations == []
    assert rep.dram_trace and rep.bus_phases


def test_performance_and_regime():
    rep = simulate(SMALL, TileConfig(1, 3, 4, 5, 5))
    assert rep.performance == pytest.approx(SMALL.ops / rep.total_cycles)
    assert rep.regime in ("comm_limited", "comp_limited")


def test_more_outstanding_is_not_slower():
    layer = alexnet_conv3()
    tile = TileConfig(1, 8, 16, 13, 13)
    one = simulate(layer, tile, BusConfig(max_outstanding=1)).total_cycles
    two = simulate(layer, tile, BusConfig(max_outstanding=2)).total_cycles
    assert two < one


def test_strict_budget():
    fp = buffer_footprint(SMALL, TileConfig(1, 3, 4, 5, 5))
    simulate(SMALL, TileConfig(1, 3, 4, 5, 5), sram_budget=fp, strict=True)
    with pytest.raises(ConfigError):
        simulate(SMALL, TileConfig(1, 3, 4, 5, 5), sram_budget=fp - 1, strict=True)


def test_config_errors():
    with pytest.raises(ConfigError):
        simulate(SMALL, TileConfig(1, 13, 4, 5, 5))
    with pytest.raises(ConfigError):
        simulate(SMALL, TileConfig(1, 3, 4, 5, 5), engine="warp")
    with pytest.raises(ConfigError):
        simulate(SMALL, TileConfig(1, 3, 4, 5, 5), engine="fast", trace_dram=True)
    with pytest.raises(ConfigError):
        simulate(SMALL, TileConfig(1, 3, 4, 5, 5), accel_cfg=AccelConfig(max_burst_beats=2048))


def test_trace_export(tmp_path):
    rep = simulate(SMALL, TileConfig(1, 3, 4, 5, 5))
    with pytest.raises(TraceUnavailable):
        emit_trace(rep, "dram", tmp_path / "d.csv")
    p = emit_trace(rep, "passes", tmp_path / "p.csv")
    assert p.read_text().count("\n") == len(rep.per_pass) + 1


def test_report_json_round_trip_keys():
    import json
    d = json.loads(simulate(SMALL, TileConfig(1, 3, 4, 5, 5)).to_json())
    assert d["pass_count"] == 48
    assert set(d) >= {"total_cycles", "performance", "regime", "per_pass", "command_counts", "violations"}
