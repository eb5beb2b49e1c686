"""Multichannel WAV and CSV input/output.

Impulse responses are written as 32-bit float WAV with a JSON sidecar
(same stem, ``.json``) holding the simulation geometry.  Reading accepts
8/16/24/32-bit integer and 32/64-bit float files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from scipy.io import wavfile

from .errors import ValidationError
from .estimator import IntervalCoherence
from .rirsim import ImpulseResponseSet

FLOAT_FORMAT = "{:.12g}"

ESTIMATE_COLUMNS = ("interval_index", "t_start_s", "t_end_s", "frequency_hz",
                    "coherence_real", "coherence_imag", "n_frames", "n_pairs")


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_rir_wav(path, ir: ImpulseResponseSet) -> Path:
    """Write ``ir`` as float32 WAV plus its metadata sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rate = int(round(ir.fs))
    if rate != ir.fs:
        raise ValidationError("WAV files need an integer sample rate")
    wavfile.write(path, rate, np.ascontiguousarray(ir.data.T.astype(np.float32)))
    meta = dict(ir.metadata)
    meta["fs"] = ir.fs
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2)
    return path


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        # 24-bit files are returned left-justified in int32
        return data.astype(np.float64) / 2147483648.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise ValidationError(f"unsupported WAV sample type {data.dtype}")


def read_rir_wav(path, metadata: Optional[dict] = None) -> ImpulseResponseSet:
    """Read a multichannel WAV file as an :class:`ImpulseResponseSet`.

    Geometry metadata is taken from ``metadata`` or, failing that, from a
    sidecar JSON next to the file.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise OSError(f"{path}: not a readable WAV file ({exc})") from exc
    samples = _to_float(data)
    if samples.ndim == 1:
        samples = samples[:, None]
    if metadata is None:
        side = sidecar_path(path)
        metadata = json.loads(side.read_text()) if side.exists() else {}
    return ImpulseResponseSet(samples.T, float(rate), metadata=metadata)


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT.format(float(value))
    return value


def write_csv(path, header: Iterable[str], rows: Iterable[Iterable]) -> Path:
    """Write a CSV table with a one-line header and 12 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def estimate_rows(results: Iterable[IntervalCoherence]):
    for res in results:
        for f, g in zip(res.frequencies, res.coherence):
            yield (res.index, res.t_start, res.t_end, f, g.real, g.imag,
                   res.n_frames, res.n_pairs)


def write_estimates_csv(path, results) -> Path:
    return write_csv(path, ESTIMATE_COLUMNS, estimate_rows(results))
