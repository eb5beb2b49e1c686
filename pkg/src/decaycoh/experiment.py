"""Experiment configuration and the simulate / estimate / model / compare pipeline."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .core import MicPairSpec, RoomSpec, WavenumberGrid
from .decay import QuadratureConfig, decaying_coherence_curve, mc_coherence
from .errors import ValidationError
from .estimator import EstimationConfig, IntervalCoherence, estimate_all
from .isotropic import cylindrical_coherence, spherical_coherence
from .rirsim import ImpulseResponseSet, SimConfig, linear_array, synthesize_rir

DEFAULT_CONFIG = {
    "room": {"lx": 6.0, "ly": 4.0, "lz": 3.0, "rx": 0.8, "ry": 1.0, "rz": 1.0, "c": 343.0},
    "array": {
        "n_mics": 16,
        "spacing": 0.08,
        "theta_mic_deg": 0.0,
        "phi_mic_deg": 0.0,
        "center": None,
        "positions": None,
    },
    "source": [4.8, 3.2, 2.6],
    "simulation": {
        "fs": 16000,
        "length_s": 0.4,
        "max_order": None,
        "fractional": True,
        "walls": None,
        "max_images": 2_000_000,
    },
    "estimation": {
        "interval_s": 0.1,
        "window_length": 1024,
        "overlap": 0.75,
        "nfft": 1024,
        "window": "hann",
        "pairs": None,
        "allow_mixed_pairs": False,
    },
    "model": {
        "time_offset_s": 0.010,
        "band_hz": [200.0, 7500.0],
        "frequencies_hz": None,
        "quad_tol": 1e-8,
        "quad_order": 12,
        "max_panels": 20000,
        "mc_samples": 0,
    },
    "output_dir": "out",
    "seed": 0,
}


def _merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def apply_override(doc: dict, assignment: str) -> dict:
    """Apply ``a.b.c=value`` to a nested config dict; ``value`` is parsed as JSON."""
    if "=" not in assignment:
        raise ValidationError(f"override {assignment!r} is not of the form path=value")
    path, raw = assignment.split("=", 1)
    keys = path.strip().split(".")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = doc
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise ValidationError(f"override path {path!r} does not name a config section")
        node = node[key]
    if keys[-1] not in node:
        raise ValidationError(f"unknown config key {path!r}")
    node[keys[-1]] = value
    return doc


@dataclass(frozen=True)
class ExperimentConfig:
    room: RoomSpec
    mic: MicPairSpec
    sim: SimConfig
    estimation: EstimationConfig
    time_offset: float = 0.010
    band: Tuple[float, float] = (200.0, 7500.0)
    frequencies: Optional[Tuple[float, ...]] = None
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    mc_samples: int = 0
    output_dir: Path = Path("out")
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (0.0 <= self.time_offset < self.estimation.interval):
            raise ValidationError("time offset must lie within one interval")
        lo, hi = self.band
        if not (0.0 <= lo < hi):
            raise ValidationError("frequency band must satisfy 0 <= low < high")
        if self.frequencies is not None and len(self.frequencies) == 0:
            raise ValidationError("frequency grid is empty")
        if self.mc_samples < 0:
            raise ValidationError("mc_samples must be >= 0")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = _merge(DEFAULT_CONFIG, doc)
        try:
            return cls._build(doc)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed config: {exc}") from exc

    @classmethod
    def _build(cls, doc):
        sim_doc, arr, est_doc, mod = (doc["simulation"], doc["array"],
                                      doc["estimation"], doc["model"])
        base_room = RoomSpec(**doc["room"])
        if arr["positions"] is not None:
            mics = np.asarray(arr["positions"], dtype=float)
            if mics.ndim != 2 or mics.shape[0] < 2:
                raise ValidationError("array.positions needs at least two 3-vectors")
            step = mics[1] - mics[0]
            d = float(np.linalg.norm(step))
            if d == 0.0:
                raise ValidationError("first two microphones coincide")
            theta = math.acos(max(-1.0, min(1.0, step[0] / d)))
            phi = math.atan2(step[2], step[1])
            mic = MicPairSpec(d, theta, phi)
        else:
            mic = MicPairSpec.from_degrees(arr["spacing"], arr["theta_mic_deg"],
                                           arr["phi_mic_deg"])
            center = arr["center"]
            if center is None:
                center = 0.5 * base_room.dimensions
            mics = linear_array(center, int(arr["n_mics"]), mic.d,
                                mic.theta_mic, mic.phi_mic)
        fs = float(sim_doc["fs"])
        length_s = float(sim_doc["length_s"])
        if not (math.isfinite(length_s) and length_s > 0.0):
            raise ValidationError("simulation.length_s must be > 0")
        sim = SimConfig(
            room=base_room,
            source=doc["source"],
            mics=mics,
            fs=fs,
            length=int(round(length_s * fs)),
            max_order=sim_doc["max_order"],
            fractional=bool(sim_doc["fractional"]),
            walls=sim_doc["walls"],
            max_images=int(sim_doc["max_images"]),
        )
        estimation = EstimationConfig(
            interval=float(est_doc["interval_s"]),
            window_length=int(est_doc["window_length"]),
            overlap=float(est_doc["overlap"]),
            nfft=int(est_doc["nfft"]),
            window=est_doc["window"],
            pairs=est_doc["pairs"],
            allow_mixed_pairs=bool(est_doc["allow_mixed_pairs"]),
        )
        quad = QuadratureConfig(tol=float(mod["quad_tol"]), order=int(mod["quad_order"]),
                                max_panels=int(mod["max_panels"]))
        freqs = mod["frequencies_hz"]
        return cls(
            # six wall coefficients collapse to per-axis geometric means for the model
            room=sim.effective_room(),
            mic=mic,
            sim=sim,
            estimation=estimation,
            time_offset=float(mod["time_offset_s"]),
            band=tuple(float(b) for b in mod["band_hz"]),
            frequencies=None if freqs is None else tuple(float(f) for f in freqs),
            quadrature=quad,
            mc_samples=int(mod["mc_samples"]),
            output_dir=Path(doc["output_dir"]),
            seed=int(doc["seed"]),
            raw=doc,
        )

    @classmethod
    def load(cls, path=None, overrides=()) -> "ExperimentConfig":
        doc = {}
        if path is not None:
            with open(path) as fh:
                doc = json.load(fh)
        doc = _merge(DEFAULT_CONFIG, doc)
        for assignment in overrides:
            apply_override(doc, assignment)
        return cls.from_dict(doc)

    @property
    def n_intervals(self) -> int:
        return self.sim.length // self.estimation.interval_samples(self.sim.fs)

    def interval_times(self) -> List[Tuple[float, float, float]]:
        """``(start, end, model time)`` for every analysis interval."""
        size = self.estimation.interval_samples(self.sim.fs)
        out = []
        for i in range(self.n_intervals):
            start = i * size / self.sim.fs
            end = (i + 1) * size / self.sim.fs
            out.append((start, end, start + self.time_offset))
        return out

    def model_frequencies(self) -> np.ndarray:
        if self.frequencies is not None:
            return np.asarray(self.frequencies, dtype=float)
        return self.estimation.frequencies(self.sim.fs)


@dataclass
class ModelCurves:
    index: int
    t: float
    frequencies: np.ndarray
    model: np.ndarray
    sinc: np.ndarray
    j0: np.ndarray
    mc: Optional[np.ndarray] = None
    mc_stderr: Optional[np.ndarray] = None


def model_curves(cfg: ExperimentConfig) -> List[ModelCurves]:
    """Decaying-field model plus isotropic references for each interval time."""
    freqs = cfg.model_frequencies()
    grid = WavenumberGrid.from_frequencies(freqs, cfg.room.c)
    sinc = np.asarray(spherical_coherence(grid.values, cfg.mic.d))
    j0 = np.asarray(cylindrical_coherence(grid.values, cfg.mic.d))
    out = []
    for index, (_, _, t) in enumerate(cfg.interval_times()):
        curve = decaying_coherence_curve(grid, t, cfg.room, cfg.mic, cfg.quadrature)
        item = ModelCurves(index, t, freqs, curve.values, sinc, j0)
        if cfg.mc_samples:
            pairs = [mc_coherence(k, t, cfg.room, cfg.mic, cfg.mc_samples,
                                  seed=cfg.seed + 1000003 * index + j)
                     for j, k in enumerate(grid.values)]
            item.mc = np.array([p[0] for p in pairs])
            item.mc_stderr = np.array([p[1] for p in pairs])
        out.append(item)
    return out


def simulate(cfg: ExperimentConfig) -> ImpulseResponseSet:
    return synthesize_rir(cfg.sim)


def estimate(ir: ImpulseResponseSet, cfg: ExperimentConfig) -> List[IntervalCoherence]:
    return estimate_all(ir, cfg.estimation)


def rmse(a, b) -> float:
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean(diff * diff))) if diff.size else math.nan


@dataclass
class IntervalComparison:
    estimate: IntervalCoherence
    curves: ModelCurves
    in_band: np.ndarray
    rmse_model: float
    rmse_sinc: float

    def summary(self) -> dict:
        return {
            "interval_index": self.estimate.index,
            "t_start_s": self.estimate.t_start,
            "t_end_s": self.estimate.t_end,
            "t_model_s": self.curves.t,
            "n_bins": int(self.in_band.sum()),
            "rmse_model": self.rmse_model,
            "rmse_sinc": self.rmse_sinc,
        }


def compare(cfg: ExperimentConfig, ir: Optional[ImpulseResponseSet] = None
            ) -> List[IntervalComparison]:
    """Simulate (unless ``ir`` is given), estimate, model, and score each interval.

    RMSEs use the real part of the estimate over valid bins inside the band.
    """
    if cfg.frequencies is not None:
        raise ValidationError("compare evaluates the model on the estimator bins; "
                              "drop model.frequencies_hz")
    if ir is None:
        ir = simulate(cfg)
    estimates = estimate(ir, cfg)
    curves = model_curves(cfg)
    lo, hi = cfg.band
    out = []
    for est, cur in zip(estimates, curves):
        in_band = (est.frequencies >= lo) & (est.frequencies <= hi) & est.valid
        real = est.coherence.real[in_band]
        out.append(IntervalComparison(
            est, cur, in_band,
            rmse_model=rmse(real, cur.model.real[in_band]),
            rmse_sinc=rmse(real, cur.sinc[in_band]),
        ))
    return out

