import json

import pytest
from hypothesis import given, strategies as st

from accsim.bus import BusConfig
from accsim.estimator import (BUS_LIMITED, CONVENTIONAL, SCALED_UNIFORM, estimate, estimate_conventional,
                              step1_burst_lengths, step2_dataset_duration, step3_bandwidth,
                              step4_interval_duration)
from accsim.memmap import DataType
from accsim.simulator import simulate
from accsim.workload import LayerShape, TileConfig, alexnet_conv3, iter_passes, pass_amounts

FIG_TILE = TileConfig(1, 2, 64, 6, 13)


def test_step4_worked_example():
    # R = (1200/120*8, 180/18*2) = (80, 20) bursts; m = 20; A = (20/8*120, 20/2*18) = (300, 180)
    dur, rest = step4_interval_duration((0.4, 0.3), (1200, 180), (120, 18), (8, 2))
    assert rest == [900.0, 0.0]
    assert dur == max(300 / 0.4, 180 / 0.3) == 750.0


def test_step4_single_dmac():
    dur, rest = step4_interval_duration((0.5,), (240,), (120,), (8,))
    assert (dur, rest) == (480.0, [0.0])


def test_step4_rejects_bad_input():
    with pytest.raises(ValueError):
        step4_interval_duration((0.5,), (0,), (120,), (8,))
    with pytest.raises(ValueError):
        step4_interval_duration((0.5, 0.5), (10,), (120,), (8,))


@given(st.lists(st.tuples(st.floats(0.05, 1.0), st.integers(1, 5000), st.integers(1, 300), st.integers(1, 20)),
                min_size=1, max_size=3))
def test_step4_ends_when_first_dmac_finishes(rows):
    U, P, C, Bc = zip(*rows)
    dur, rest = step4_interval_duration(U, P, C, Bc)
    assert min(rest) == pytest.approx(0, abs=1e-9)
    assert all(r >= -1e-9 for r in rest)
    moved = [(p - r) / c * b for p, r, c, b in zip(P, rest, C, Bc)]
    assert all(x == pytest.approx(moved[0]) for x in moved)  # equal burst counts
    assert dur == pytest.approx(max((p - r) / u for p, r, u in zip(P, rest, U)))


def test_step1_fig_tile():
    tb = step1_burst_lengths(alexnet_conv3(), FIG_TILE)
    assert (tb[DataType.IFM].C, tb[DataType.IFM].Bc, tb[DataType.IFM].lengths) == (120, 8, (16,) * 7 + (8,))
    assert (tb[DataType.W].C, tb[DataType.W].Bc, tb[DataType.W].lengths) == (18, 2, (16, 2))
    assert tb[DataType.OFM].C == 78
    assert tb[DataType.IFM].P == 240 and tb[DataType.W].P == 1152


def test_step1_amounts_match_pass():
    layer = alexnet_conv3()
    tile = TileConfig(1, 12, 8, 7, 13)
    for p in list(iter_passes(layer, tile))[20:23]:
        tb = step1_burst_lengths(layer, tile, p)
        ifm, w, _ = pass_amounts(layer, p)
        assert tb[DataType.IFM].P == ifm and tb[DataType.W].P == w


def test_step2_slower_with_longer_latency():
    tb = step1_burst_lengths(alexnet_conv3(), FIG_TILE)[DataType.W]
    times = [step2_dataset_duration(tb, bus_cfg=BusConfig(request_latency=lat))[1] for lat in (0, 5, 20, 60)]
    assert times == sorted(times)
    assert times[-1] > times[0]


def test_step2_long_latency_is_bus_limited():
    tb = step1_burst_lengths(alexnet_conv3(), FIG_TILE)[DataType.IFM]
    regime, _ = step2_dataset_duration(tb, bus_cfg=BusConfig(request_latency=200))
    assert regime == BUS_LIMITED


def test_step2_more_outstanding_is_faster():
    tb = step1_burst_lengths(alexnet_conv3(), FIG_TILE)[DataType.IFM]
    one = step2_dataset_duration(tb, bus_cfg=BusConfig(max_outstanding=1))[1]
    two = step2_dataset_duration(tb, bus_cfg=BusConfig(max_outstanding=2))[1]
    assert two < one


def test_step3_shares_one_data_bus():
    tb = step1_burst_lengths(alexnet_conv3(), FIG_TILE)
    tbs = [tb[DataType.IFM], tb[DataType.W], tb[DataType.OFM]]
    alone = [step3_bandwidth([t], [w]) [0] for t, w in zip(tbs, (False, False, True))]
    shared = step3_bandwidth(tbs, [False, False, True])
    assert sum(shared) <= 1.0
    assert all(s <= a + 1e-9 for s, a in zip(shared, alone))


def test_estimate_close_to_simulation_on_fig_tile():
    layer = alexnet_conv3()
    est = estimate(layer, FIG_TILE).total_cycles
    sim = simulate(layer, FIG_TILE, intervals=False).total_cycles
    assert abs(est / sim - 1) < 0.05
    conv = estimate_conventional(layer, FIG_TILE).total_cycles
    assert abs(conv / sim - 1) > 0.3


def test_estimate_report_shape():
    layer = LayerShape.conv(1, 12, 12, 12, 12, 3, 3)
    rep = estimate(layer, TileConfig(1, 3, 4, 5, 5), keep_intervals=True)
    d = json.loads(rep.to_json())
    assert d["pass_count"] == 48 and d["model"] == "proposed"
    assert len(d["per_pass"]) == 48
    assert all(iv["duration"] >= 0 for p in d["per_pass"] for iv in p["intervals"])
    assert rep.total_cycles >= sum(rep.per_pass_compute)


def test_conventional_hand_value():
    # one pass: load 1*1*3*3 + 1*1*3*3, compute 9 + fill, store 1
    layer = LayerShape.conv(1, 1, 1, 3, 3, 3, 3)
    rep = estimate_conventional(layer, TileConfig(1, 1, 1, 1, 1))
    assert rep.total_cycles == 18 + max(9 + 8, 1)
    assert rep.model == "conventional"
    scaled = estimate_conventional(layer, TileConfig(1, 1, 1, 1, 1), SCALED_UNIFORM)
    assert scaled.model == "scaled" and scaled.total_cycles == 18 * 1.75 + 17


def test_conventional_rejects_bad_scale():
    with pytest.raises(ValueError):
        estimate_conventional(alexnet_conv3(), FIG_TILE, (1.0, 0.0, 1.0))


def test_conventional_is_optimistic_or_equal():
    layer = LayerShape.conv(1, 12, 12, 12, 12, 3, 3)
    for tile in (TileConfig(1, 3, 4, 5, 5), TileConfig(1, 12, 2, 10, 10)):
        sim = simulate(layer, tile).total_cycles
        assert estimate_conventional(layer, tile, CONVENTIONAL).total_cycles <= sim
