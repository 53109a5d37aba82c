import itertools

import pytest
from hypothesis import given, strategies as st

from accsim.workload import (DimensionError, LayerShape, TileConfig, TileError, alexnet_conv3, buffer_footprint,
                             derive_output_dims, iter_passes, layer_traffic, pass_amounts, plan_passes, preset)


def test_output_dims():
    assert derive_output_dims(15, 15, 3, 3) == (13, 13)
    assert derive_output_dims(227, 227, 11, 11, stride=4) == (55, 55)
    assert derive_output_dims(13, 13, 3, 3, padding=1) == (13, 13)


def test_output_dims_rejects_bad_stride():
    with pytest.raises(DimensionError):
        derive_output_dims(10, 10, 3, 3, stride=2)
    with pytest.raises(DimensionError):
        derive_output_dims(2, 2, 3, 3)


def test_layer_rejects_inconsistent_outputs():
    with pytest.raises(DimensionError):
        LayerShape(1, 4, 4, 10, 10, 3, 3, 9, 8)


def test_tile_rejects_unroll_not_dividing():
    with pytest.raises(TileError):
        TileConfig(1, 4, 6, 5, 5, UM=4, UC=4)
    with pytest.raises(TileError):
        TileConfig(1, 4, 6, 5, 5).validate(LayerShape.conv(1, 2, 8, 7, 7, 3, 3))


def test_small_example_pass_structure():
    layer = LayerShape.conv(1, 12, 12, 12, 12, 3, 3)
    plan = plan_passes(layer, TileConfig(1, 3, 4, 5, 5))
    assert (layer.E, layer.F) == (10, 10)
    assert plan.pass_count == 48
    assert plan.ofm_store_period == 4
    stores = [p.index for p in iter_passes(layer, TileConfig(1, 3, 4, 5, 5)) if p.last_c]
    assert stores == list(range(3, 48, 4))


def test_alexnet_conv3_shape():
    layer = alexnet_conv3()
    assert (layer.C, layer.M, layer.E, layer.F, layer.R) == (256, 384, 13, 13, 3)
    assert layer.ops == 2 * 256 * 384 * 13 * 13 * 9


def test_preset_unknown():
    with pytest.raises(DimensionError):
        preset("vgg-conv9")


def test_footprint_hand_value():
    # 2 * (IFM 1*2*8*15 + W 2*64*9 + OFM 64*6*13)
    layer = alexnet_conv3()
    assert buffer_footprint(layer, TileConfig(1, 2, 64, 6, 13)) == 2 * (240 + 1152 + 4992)


layers = st.builds(
    LayerShape.conv,
    B=st.integers(1, 2), C=st.integers(1, 9), M=st.integers(1, 9),
    H=st.integers(3, 11), W=st.integers(3, 11), R=st.sampled_from([1, 3]), S=st.sampled_from([1, 3]))


@st.composite
def layer_and_tile(draw):
    layer = draw(layers)
    tile = TileConfig(draw(st.integers(1, layer.B)), draw(st.integers(1, layer.C)), draw(st.integers(1, layer.M)),
                      draw(st.integers(1, layer.E)), draw(st.integers(1, layer.F)))
    return layer, tile


@given(layer_and_tile())
def test_pass_count_matches_enumeration(lt):
    layer, tile = lt
    passes = list(iter_passes(layer, tile))
    assert plan_passes(layer, tile).pass_count == len(passes)
    assert [p.index for p in passes] == list(range(len(passes)))


@given(layer_and_tile())
def test_passes_cover_every_mac_once(lt):
    layer, tile = lt
    seen = set()
    for p in iter_passes(layer, tile):
        cells = itertools.product(range(p.b0, p.b0 + p.tb), range(p.c0, p.c0 + p.tc), range(p.m0, p.m0 + p.tm),
                                  range(p.e0, p.e0 + p.te), range(p.f0, p.f0 + p.tf))
        for cell in cells:
            assert cell not in seen
            seen.add(cell)
    assert len(seen) == layer.B * layer.C * layer.M * layer.E * layer.F


@given(layer_and_tile())
def test_ofm_stored_exactly_once(lt):
    layer, tile = lt
    assert layer_traffic(layer, tile)["OFM"] == layer.B * layer.M * layer.E * layer.F


@given(layer_and_tile())
def test_weights_traffic(lt):
    # weights are reloaded once per output tile position (b, e, f)
    layer, tile = lt
    positions = -(-layer.B // tile.TB) * -(-layer.E // tile.TE) * -(-layer.F // tile.TF)
    assert layer_traffic(layer, tile)["W"] == positions * layer.M * layer.C * layer.R * layer.S


@given(layer_and_tile())
def test_pass_amounts_never_exceed_tile_buffers(lt):
    layer, tile = lt
    half = buffer_footprint(layer, tile) // 2
    for p in iter_passes(layer, tile):
        assert sum(pass_amounts(layer, p)) <= half
