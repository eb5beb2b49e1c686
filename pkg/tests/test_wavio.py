import numpy as np
import pytest
from scipy.io import wavfile

from decaycoh.estimator import EstimationConfig, estimate_all
from decaycoh.rirsim import ImpulseResponseSet
from decaycoh.wavio import (
    ESTIMATE_COLUMNS,
    read_rir_wav,
    sidecar_path,
    write_csv,
    write_estimates_csv,
    write_rir_wav,
)


def test_float_round_trip_with_sidecar(tmp_path):
    data = np.random.default_rng(0).uniform(-0.5, 0.5, (3, 500))
    ir = ImpulseResponseSet(data, 16000.0, metadata={"mics": [[1, 1, 1], [1.08, 1, 1], [1.16, 1, 1]]})
    path = write_rir_wav(tmp_path / "a.wav", ir)
    assert sidecar_path(path).exists()
    back = read_rir_wav(path)
    assert back.fs == 16000.0
    np.testing.assert_array_equal(back.data, data.astype(np.float32).astype(np.float64))
    np.testing.assert_allclose(back.mic_positions[1], [1.08, 1, 1])


def test_int16_scaling(tmp_path):
    raw = np.array([[0, 0], [16384, -32768], [32767, 1]], dtype=np.int16)
    wavfile.write(tmp_path / "b.wav", 8000, raw)
    ir = read_rir_wav(tmp_path / "b.wav")
    assert ir.data.shape == (2, 3)
    np.testing.assert_array_equal(ir.data[0], [0.0, 0.5, 32767 / 32768])
    np.testing.assert_array_equal(ir.data[1], [0.0, -1.0, 1 / 32768])
    assert ir.metadata == {}


def test_int16_quantisation_error_is_bounded(tmp_path):
    x = np.random.default_rng(1).uniform(-0.99, 0.99, (2, 1000))
    wavfile.write(tmp_path / "c.wav", 16000, np.round(x.T * 32768).astype(np.int16))
    back = read_rir_wav(tmp_path / "c.wav").data
    assert np.max(np.abs(back - x)) <= 0.5 / 32768 + 1e-15


def test_uint8_and_int32(tmp_path):
    wavfile.write(tmp_path / "d.wav", 8000, np.array([[128, 0], [255, 192]], dtype=np.uint8))
    np.testing.assert_array_equal(read_rir_wav(tmp_path / "d.wav").data,
                                  [[0.0, 127 / 128], [-1.0, 0.5]])
    wavfile.write(tmp_path / "e.wav", 8000, np.array([[1 << 30, -(1 << 31)]], dtype=np.int32))
    np.testing.assert_array_equal(read_rir_wav(tmp_path / "e.wav").data, [[0.5], [-1.0]])


def test_24_bit_file(tmp_path):
    # hand-built PCM file: 2 channels, 3 bytes per sample, little endian
    frames = [(1 << 22, -(1 << 23)), (-1, (1 << 23) - 1)]
    payload = b"".join(v.to_bytes(3, "little", signed=True) for f in frames for v in f)
    header = (b"RIFF" + (36 + len(payload)).to_bytes(4, "little") + b"WAVE"
              + b"fmt " + (16).to_bytes(4, "little") + (1).to_bytes(2, "little")
              + (2).to_bytes(2, "little") + (16000).to_bytes(4, "little")
              + (16000 * 6).to_bytes(4, "little") + (6).to_bytes(2, "little")
              + (24).to_bytes(2, "little") + b"data" + len(payload).to_bytes(4, "little"))
    (tmp_path / "f.wav").write_bytes(header + payload)
    ir = read_rir_wav(tmp_path / "f.wav")
    np.testing.assert_array_equal(ir.data, [[0.5, -1 / (1 << 23)],
                                            [-1.0, ((1 << 23) - 1) / (1 << 23)]])


def test_mono_file_reads_as_one_channel(tmp_path):
    wavfile.write(tmp_path / "m.wav", 8000, np.zeros(10, dtype=np.float32))
    assert read_rir_wav(tmp_path / "m.wav").n_channels == 1


def test_garbage_file_is_an_io_error(tmp_path):
    (tmp_path / "bad.wav").write_bytes(b"not a wav file at all")
    with pytest.raises(OSError):
        read_rir_wav(tmp_path / "bad.wav")


def test_estimate_on_reread_wav_matches_float32_data(tmp_path):
    data = np.random.default_rng(2).standard_normal((2, 3200))
    ir = ImpulseResponseSet(data, 16000.0)
    back = read_rir_wav(write_rir_wav(tmp_path / "r.wav", ir))
    cast = ImpulseResponseSet(data.astype(np.float32).astype(np.float64), 16000.0)
    cfg = EstimationConfig()
    for a, b in zip(estimate_all(back, cfg), estimate_all(cast, cfg)):
        np.testing.assert_array_equal(a.coherence, b.coherence)


def test_csv_writers(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "b"], [(1, 0.1 + 0.2), (2, np.float64(1 / 3))])
    lines = path.read_text().splitlines()
    assert lines == ["a,b", "1,0.3", "2,0.333333333333"]
    ir = ImpulseResponseSet(np.random.default_rng(3).standard_normal((2, 1600)), 16000.0)
    est = write_estimates_csv(tmp_path / "e.csv", estimate_all(ir, EstimationConfig()))
    rows = est.read_text().splitlines()
    assert rows[0].split(",") == list(ESTIMATE_COLUMNS)
    assert len(rows) == 1 + 513
