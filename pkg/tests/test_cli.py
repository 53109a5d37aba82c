import json

import pytest

from accsim.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, main
from accsim.config import ConfigFileError, RunConfig
from accsim.dse import DesignSpace, reference_space
from accsim.workload import TileConfig

SMALL = {"B": 1, "C": 12, "M": 12, "H": 12, "W": 12, "R": 3, "S": 3}


def write_cfg(tmp_path, **kw):
    cfg = RunConfig(layers=[SMALL], output_dir=str(tmp_path / "out"), **kw)
    p = tmp_path / "run.yaml"
    p.write_text(cfg.dumps())
    return p


def test_config_round_trip():
    cfg = RunConfig(layers=["alexnet-conv3", SMALL], tile=TileConfig(1, 2, 64, 6, 13), space=reference_space(),
                    sram_budget=5000, traces=["dram"], scale=[1.5, 2.0, 1.0], unroll_set=[[4, 3]])
    again = RunConfig.loads(cfg.dumps())
    assert again == RunConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


def test_config_rejects_unknown_keys_and_versions():
    with pytest.raises(ConfigFileError):
        RunConfig.loads("layers: [alexnet-conv3]\ntile_size: 3\n")
    with pytest.raises(ConfigFileError):
        RunConfig.loads("schema_version: 7\n")
    with pytest.raises(ConfigFileError):
        RunConfig.loads("layers: [vgg-conv9]\n")
    with pytest.raises(ConfigFileError):
        RunConfig.loads("space: huge\n")
    with pytest.raises(ConfigFileError):
        RunConfig.loads("tile: [1, 2\n")


def test_space_preset_by_name():
    assert RunConfig.loads("space: reference\n").space == reference_space()


def test_simulate_writes_report_and_traces(tmp_path, capsys):
    p = write_cfg(tmp_path, tile=TileConfig(1, 3, 4, 5, 5))
    assert main(["simulate", "--config", str(p), "--trace", "dram", "--trace", "passes"]) == EXIT_OK
    out = tmp_path / "out"
    rep = json.loads((out / "simulate.json").read_text())
    assert rep["pass_count"] == 48 and rep["violations"] == []
    assert (out / "trace_dram.csv").read_text().startswith("cycle,kind,bank")
    assert "total_cycles=" in capsys.readouterr().out


def test_estimate_models(tmp_path):
    p = write_cfg(tmp_path, tile=TileConfig(1, 3, 4, 5, 5))
    for model in ("proposed", "conventional", "scaled"):
        assert main(["estimate", "--config", str(p), "--model", model]) == EXIT_OK
        assert json.loads((tmp_path / "out" / f"estimate_{model}.json").read_text())["model"] == model


def test_env_overrides_output_dir(tmp_path, monkeypatch):
    p = write_cfg(tmp_path, tile=TileConfig(1, 3, 4, 5, 5))
    monkeypatch.setenv("ACCSIM_OUT", str(tmp_path / "env"))
    assert main(["estimate", "--config", str(p)]) == EXIT_OK
    assert (tmp_path / "env" / "estimate_proposed.json").exists()


def test_config_errors_exit_2(tmp_path):
    p = write_cfg(tmp_path)
    assert main(["simulate", "--config", str(p)]) == EXIT_CONFIG  # no tile
    assert main(["simulate", "--config", str(p), "--tile", "1,2"]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(p), "--tile", "1,13,4,5,5"]) == EXIT_CONFIG
    assert main(["estimate", "--config", str(p), "--tile", "1,3,4,5,5", "--model", "magic"]) == EXIT_CONFIG
    assert main(["dse", "--config", str(p)]) == EXIT_CONFIG  # no space
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text("colour: blue\n")
    assert main(["estimate", "--config", str(bad)]) == EXIT_CONFIG


def test_dse_and_infeasible(tmp_path):
    p = write_cfg(tmp_path, space=DesignSpace((1,), (3, 6), (4,), (5, 10), (10,)))
    assert main(["dse", "--config", str(p)]) == EXIT_OK
    out = tmp_path / "out"
    assert (out / "dse_points.csv").read_text().count("\n") == 5
    assert json.loads((out / "dse.json").read_text())["best"]
    assert main(["dse", "--config", str(p), "--budget", "10"]) == EXIT_INFEASIBLE
    assert main(["dse", "--config", str(p), "--top-fraction", "0.5"]) == EXIT_OK


def test_trace_command(tmp_path):
    p = write_cfg(tmp_path, tile=TileConfig(1, 3, 4, 5, 5))
    assert main(["trace", "--config", str(p), "--kind", "bus"]) == EXIT_OK
    assert (tmp_path / "out" / "trace_bus.csv").read_text().startswith("cycle,txn,phase,beat")
