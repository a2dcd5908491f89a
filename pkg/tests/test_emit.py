import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from components.emit import RECORD_COLUMNS, config_hash, emit, records_frame, write_csv
from components.summary import record_tiles, render_tile
from modules.harness import ExperimentConfig, ResultRecord
from modules.spectrum import GapProfile
from modules.utils import load_records, load_records_frame


def sample_record(instance_id=0, total_time=1.0, strategy="ramp", err=2.0):
    return ResultRecord(
        instance_id=instance_id,
        seed=100 + instance_id,
        connectivity="linear",
        n_qubits=2,
        strategy=strategy,
        total_time=total_time,
        err_pct=err,
        fidelity=0.9,
        final_energy=-1.2,
        ground_energy=-1.3,
        best_params=[0.5, 0.25],
        eval_count=3,
        wall_time=0.1,
    )


def sample_aggregates():
    return pd.DataFrame({
        "N": [2],
        "T": [1.0],
        "strategy": ["ramp"],
        "mean_err_pct": [2.0],
        "mean_fidelity": [0.9],
        "n_ok": [2],
        "n_fail": [0],
    })


def test_sweep_files(tmp_path):
    config = ExperimentConfig()
    records = [sample_record(1), sample_record(0)]
    files = emit((records, sample_aggregates()), config, tmp_path)
    names = [p.name for p in files]
    assert names == ["records.json", "records.csv", "aggregates.csv", "time_to_target.csv", "manifest.json"]
    loaded = load_records(tmp_path / "records.json")
    assert [r.instance_id for r in loaded] == [0, 1]
    assert loaded[1] == records[0]


def test_records_csv_columns(tmp_path):
    emit(([sample_record()], sample_aggregates()), ExperimentConfig(), tmp_path)
    frame = pd.read_csv(tmp_path / "records.csv")
    assert list(frame.columns) == RECORD_COLUMNS
    assert json.loads(frame.loc[0, "best_params"]) == [0.5, 0.25]


def test_csv_uses_lf_line_endings(tmp_path):
    path = write_csv(records_frame([sample_record(), sample_record(1)]), tmp_path / "r.csv", {"note": "x"})
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    assert raw.startswith(b'# note="x"\n')


def test_manifest(tmp_path):
    config = ExperimentConfig(seed=7)
    emit(([sample_record(0), sample_record(1)], sample_aggregates()), config, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config_hash"] == config_hash(config)
    assert manifest["seeds"] == [100, 101]
    assert manifest["conventions"]["numerator"] == "full"
    assert "records.csv" in manifest["files"]
    assert set(manifest["libraries"]) == {"numpy", "scipy", "pandas"}


def test_config_hash_tracks_content_only():
    base = ExperimentConfig()
    assert config_hash(base) == config_hash(ExperimentConfig())
    assert config_hash(base) != config_hash(ExperimentConfig(seed=1))
    assert config_hash(base) == config_hash(ExperimentConfig(workers=4))
    assert len(config_hash(base)) == 64


def test_gap_files_carry_their_provenance(tmp_path):
    grid = np.linspace(0.0, 1.0, 5)
    profiles = {
        "ramp": GapProfile(grid, np.array([2.0, 1.0, 0.5, 1.0, 1.5]), "ramp", 2, [3, 4]),
        "z-aux": GapProfile(grid, np.array([2.0, 1.5, 1.0, 1.2, 1.5]), "z-aux", 2, [3, 4], dominance=0.8),
    }
    files = emit(profiles, ExperimentConfig(), tmp_path)
    assert {p.name for p in files} == {"gap_ramp.csv", "gap_z-aux.csv", "gap_summary.csv", "manifest.json"}
    header = (tmp_path / "gap_ramp.csv").read_text().splitlines()[:3]
    assert header == ['# strategy="ramp"', "# instances=2", "# seeds=[3, 4]"]
    frame = pd.read_csv(tmp_path / "gap_ramp.csv", comment="#")
    assert list(frame.columns) == ["s", "gap"]
    np.testing.assert_allclose(frame["gap"], profiles["ramp"].gaps)
    summary = pd.read_csv(tmp_path / "gap_summary.csv").set_index("strategy")
    assert summary.loc["ramp", "min_gap"] == pytest.approx(0.5)
    assert summary.loc["ramp", "s_at_min"] == pytest.approx(0.5)
    assert not summary.loc["ramp", "monotone"]
    assert summary.loc["z-aux", "dominance"] == pytest.approx(0.8)
    assert np.isnan(summary.loc["ramp", "dominance"])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["diagnostics"] == {"dominance_over_ramp": {"z-aux": 0.8}, "dominance_target": 0.9}


def test_records_frame_keeps_the_last_repeat(tmp_path):
    first = sample_record(0, err=5.0)
    rerun = replace(first, err_pct=4.0)
    other = sample_record(0, total_time=2.0)
    path = write_csv(records_frame([other, first, rerun]), tmp_path / "records.csv")
    frame = load_records_frame(path)
    assert len(frame) == 2
    assert frame["total_time"].tolist() == [1.0, 2.0]
    assert frame.loc[0, "err_pct"] == 4.0


def test_render_tile():
    assert render_tile("E%", "0.1") == "E%" + " " * 20 + "0.1"


def test_failed_record_tiles():
    failed = replace(sample_record(), status="failed", reason="IntegrationError: no convergence")
    tiles = dict(record_tiles(failed))
    assert tiles["Status"].startswith("failed (IntegrationError")
    assert "E%" not in tiles
