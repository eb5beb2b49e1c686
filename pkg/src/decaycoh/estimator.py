"""Short-time coherence estimation from multichannel impulse responses.

Each response is cut into equal, non-overlapping intervals.  Inside an
interval the channels are transformed frame by frame, and the auto- and
cross-spectra are averaged over all frames and all selected microphone pairs
before forming ``Phi12 / sqrt(Phi11 * Phi22)``.  Because the cross-spectrum is
accumulated with the same pairing as the auto-spectra, the magnitude of the
estimate never exceeds one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import get_window

from .errors import ValidationError
from .rirsim import ImpulseResponseSet

_INVALID_BELOW = 1e-30
_GEOMETRY_RTOL = 1e-6


@dataclass(frozen=True)
class EstimationConfig:
    """STFT and averaging settings.

    ``pairs`` lists explicit channel pairs; ``None`` selects all adjacent
    pairs ``(i, i + 1)``.  Pairs with differing spacing or orientation are
    rejected unless ``allow_mixed_pairs`` is set.
    """

    interval: float = 0.1
    window_length: int = 1024
    overlap: float = 0.75
    nfft: int = 1024
    window: str = "hann"
    pairs: Optional[Tuple[Tuple[int, int], ...]] = None
    allow_mixed_pairs: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.interval) and self.interval > 0.0):
            raise ValidationError("interval length must be > 0")
        if self.window_length < 1:
            raise ValidationError("window length must be >= 1")
        if not 0.0 <= self.overlap < 1.0:
            raise ValidationError("overlap must lie in [0, 1)")
        if self.window_length > self.nfft:
            raise ValidationError("window length must not exceed the DFT length")
        if self.pairs is not None:
            pairs = tuple((int(a), int(b)) for a, b in self.pairs)
            if not pairs or any(a == b or a < 0 or b < 0 for a, b in pairs):
                raise ValidationError("pairs must be distinct non-negative channel indices")
            object.__setattr__(self, "pairs", pairs)

    @property
    def hop(self) -> int:
        return max(1, int(round(self.window_length * (1.0 - self.overlap))))

    def interval_samples(self, fs: float) -> int:
        n = int(round(self.interval * fs))
        if n < self.window_length:
            raise ValidationError(
                f"interval of {n} samples is shorter than the window ({self.window_length})")
        return n

    def frequencies(self, fs: float) -> np.ndarray:
        return np.fft.rfftfreq(self.nfft, d=1.0 / fs)


@dataclass(frozen=True)
class IntervalCoherence:
    """Coherence estimate for one time interval.

    Invalid bins (vanishing auto-spectrum) hold NaN and are ``False`` in
    ``valid``.
    """

    index: int
    t_start: float
    t_end: float
    frequencies: np.ndarray
    coherence: np.ndarray
    valid: np.ndarray
    n_frames: int
    n_pairs: int


def segment_intervals(ir: ImpulseResponseSet, cfg: EstimationConfig) -> List[range]:
    """Split the response into whole, non-overlapping intervals.

    A trailing remainder shorter than one interval is dropped.
    """
    size = cfg.interval_samples(ir.fs)
    count = ir.n_samples // size
    if count == 0:
        raise ValidationError(
            f"response of {ir.n_samples} samples is shorter than one interval ({size})")
    return [range(i * size, (i + 1) * size) for i in range(count)]


def stft_frames(segment, cfg: EstimationConfig) -> np.ndarray:
    """Windowed one-sided spectra of every full frame in ``segment``.

    ``segment`` may be 1-D or ``(channels, samples)``; frames run along the
    second-to-last output axis and bins along the last.
    """
    x = np.asarray(segment, dtype=float)
    n = x.shape[-1]
    if n < cfg.window_length:
        raise ValidationError("segment is shorter than one window")
    n_frames = (n - cfg.window_length) // cfg.hop + 1
    starts = np.arange(n_frames) * cfg.hop
    index = starts[:, None] + np.arange(cfg.window_length)
    window = get_window(cfg.window, cfg.window_length)
    frames = x[..., index] * window
    return np.fft.rfft(frames, n=cfg.nfft, axis=-1)


def _adjacent_pairs(n_channels):
    return tuple((i, i + 1) for i in range(n_channels - 1))


def _check_pair_geometry(pairs, positions):
    vectors = np.array([positions[b] - positions[a] for a, b in pairs])
    spacing = np.linalg.norm(vectors, axis=1)
    if np.any(spacing == 0.0):
        raise ValidationError("a selected pair has coincident microphones")
    ref = vectors[0]
    scale = max(spacing[0], 1e-12)
    if not np.allclose(vectors, ref, rtol=0.0, atol=_GEOMETRY_RTOL * scale):
        raise ValidationError(
            "selected pairs differ in spacing or orientation; "
            "set allow_mixed_pairs to average them anyway")


def select_pairs(ir: ImpulseResponseSet, cfg: EstimationConfig) -> Tuple[Tuple[int, int], ...]:
    """Resolve the pair policy against the channel count and known geometry."""
    if ir.n_channels < 2:
        raise ValidationError("coherence needs at least two channels")
    pairs = cfg.pairs or _adjacent_pairs(ir.n_channels)
    if any(max(p) >= ir.n_channels for p in pairs):
        raise ValidationError("pair index exceeds the channel count")
    positions = ir.mic_positions
    if positions is not None and not cfg.allow_mixed_pairs:
        _check_pair_geometry(pairs, positions)
    return pairs


def coherence_from_spectra(spectra: np.ndarray, pairs: Sequence[Tuple[int, int]]):
    """Pair- and frame-averaged coherence from per-channel spectra.

    Args:
        spectra: complex array ``(channels, frames, bins)``.
        pairs: channel index pairs ``(first, second)``.

    Returns:
        ``(coherence, valid)``; ``coherence`` is ``E[conj(X1) X2] /
        sqrt(E|X1|^2 E|X2|^2)`` and NaN where ``valid`` is False.
    """
    first = spectra[[a for a, _ in pairs]]
    second = spectra[[b for _, b in pairs]]
    # Spelled out in real arithmetic so that identical channels give auto- and
    # cross-spectra that agree bit for bit (complex multiply may fuse ops).
    fr, fi, sr, si = first.real, first.imag, second.real, second.imag
    cross = ((fr * sr + fi * si).mean(axis=(0, 1))
             + 1j * (fr * si - fi * sr).mean(axis=(0, 1)))
    auto1 = (fr * fr + fi * fi).mean(axis=(0, 1))
    auto2 = (sr * sr + si * si).mean(axis=(0, 1))
    valid = (auto1 >= _INVALID_BELOW) & (auto2 >= _INVALID_BELOW)
    coherence = np.full(cross.shape, np.nan + 1j * np.nan)
    denom = np.sqrt(auto1[valid] * auto2[valid])
    coherence[valid] = cross.real[valid] / denom + 1j * (cross.imag[valid] / denom)
    return coherence, valid


def estimate_interval_coherence(ir: ImpulseResponseSet, span: range,
                                cfg: EstimationConfig, index: int = 0) -> IntervalCoherence:
    """Coherence of the samples in ``span`` averaged over frames and pairs."""
    pairs = select_pairs(ir, cfg)
    segment = ir.data[:, span.start:span.stop]
    if segment.shape[1] < cfg.window_length:
        raise ValidationError("interval does not contain a full frame")
    spectra = stft_frames(segment, cfg)
    coherence, valid = coherence_from_spectra(spectra, pairs)
    return IntervalCoherence(
        index=index,
        t_start=span.start / ir.fs,
        t_end=span.stop / ir.fs,
        frequencies=cfg.frequencies(ir.fs),
        coherence=coherence,
        valid=valid,
        n_frames=spectra.shape[1],
        n_pairs=len(pairs),
    )


def estimate_all(ir: ImpulseResponseSet, cfg: EstimationConfig) -> List[IntervalCoherence]:
    """Segment the response and estimate the coherence of every interval."""
    return [estimate_interval_coherence(ir, span, cfg, index=i)
            for i, span in enumerate(segment_intervals(ir, cfg))]
