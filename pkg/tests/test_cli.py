import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from scipy.io import wavfile

from decaycoh import experiment
from decaycoh.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from decaycoh.isotropic import spherical_coherence
from decaycoh.wavio import FLOAT_FORMAT, read_rir_wav

SMALL = [
    "array.n_mics=4",
    "simulation.length_s=0.2",
    "simulation.max_order=6",
]


def read_table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(*argv):
    return main([str(a) for a in argv])


def with_overrides(values):
    out = []
    for v in values:
        out += ["--set", v]
    return out


def test_model_reverberant_room_reduces_to_sinc(tmp_path):
    code = run("model", "--out", tmp_path, *with_overrides(
        ["room.rx=1.0", "model.frequencies_hz=[100, 500, 1000, 4000]"]))
    assert code == EXIT_OK
    rows = read_table(tmp_path / "model.csv")
    assert len(rows) == 4 * 4
    for row in rows:
        k = 2 * np.pi * float(row["frequency_hz"]) / 343.0
        assert float(row["model_real"]) == pytest.approx(spherical_coherence(k, 0.08), abs=1e-6)
        assert abs(float(row["model_imag"])) < 1e-6


def test_model_with_monte_carlo_columns(tmp_path):
    code = run("model", "--out", tmp_path, "--seed", 3, *with_overrides(
        ["model.frequencies_hz=[1000]", "model.mc_samples=20000"]))
    assert code == EXIT_OK
    rows = read_table(tmp_path / "model.csv")
    for row in rows:
        err = abs(float(row["mc_real"]) - float(row["model_real"]))
        assert err < max(5 * float(row["mc_stderr"]), 5e-3)


def test_simulate_then_estimate(tmp_path):
    assert run("simulate", "--out", tmp_path, *with_overrides(SMALL)) == EXIT_OK
    wav = tmp_path / "rir.wav"
    ir = read_rir_wav(wav)
    assert ir.data.shape == (4, 3200)
    assert run("estimate", wav, "--out", tmp_path) == EXIT_OK
    rows = read_table(tmp_path / "estimate.csv")
    assert len(rows) == 2 * 513
    assert {r["n_pairs"] for r in rows} == {"3"}
    assert {r["n_frames"] for r in rows} == {"3"}


def test_compare_model_column_matches_library(tmp_path):
    overrides = SMALL + ["simulation.length_s=0.1"]
    code = run("compare", "--gnuplot", "--out", tmp_path, *with_overrides(overrides))
    assert code == EXIT_OK
    rows = read_table(tmp_path / "compare.csv")
    cfg = experiment.ExperimentConfig.load(None, overrides)
    curves = experiment.model_curves(cfg)
    expected = [FLOAT_FORMAT.format(float(v)) for c in curves for v in c.model.real]
    assert [r["model"] for r in rows] == expected
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(summary["intervals"]) == 1
    assert summary["intervals"][0]["n_bins"] > 400
    assert (tmp_path / "compare.gp").exists()


def test_config_file_and_override_precedence(tmp_path):
    doc = {"room": {"rx": 0.5}, "output_dir": str(tmp_path / "from_file")}
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(doc))
    cfg = experiment.ExperimentConfig.load(cfg_path, ["room.rx=0.6"])
    assert cfg.room.rx == 0.6
    assert cfg.room.ry == 1.0
    code = run("model", "--config", cfg_path, *with_overrides(["model.frequencies_hz=[500]"]))
    assert code == EXIT_OK
    assert (tmp_path / "from_file" / "model.csv").exists()


@pytest.mark.parametrize("override", [
    "model.frequencies_hz=[]",
    "array.center=[5.9, 2, 1.5]",        # end microphones leave the room
    "room.rx=1.5",
    "model.no_such_key=1",
    "estimation.interval_s=0.01",
])
def test_invalid_configuration_exits_2(tmp_path, override, capsys):
    assert run("model", "--out", tmp_path, "--set", override) == EXIT_VALIDATION
    assert "error" in capsys.readouterr().err


def test_mono_wav_exits_2(tmp_path):
    wavfile.write(tmp_path / "m.wav", 16000, np.zeros(3200, dtype=np.float32))
    assert run("estimate", tmp_path / "m.wav", "--out", tmp_path) == EXIT_VALIDATION


def test_io_failures_exit_4(tmp_path):
    assert run("estimate", tmp_path / "missing.wav", "--out", tmp_path) == EXIT_IO
    (tmp_path / "junk.wav").write_bytes(b"junk")
    assert run("estimate", tmp_path / "junk.wav", "--out", tmp_path) == EXIT_IO
    assert run("model", "--config", tmp_path / "missing.json") == EXIT_IO


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "decaycoh", "model", "--out", str(tmp_path),
         "--set", "model.frequencies_hz=[250]"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == str(tmp_path / "model.csv")
