import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import signal

from decaycoh.errors import ValidationError
from decaycoh.estimator import (
    EstimationConfig,
    coherence_from_spectra,
    estimate_all,
    estimate_interval_coherence,
    segment_intervals,
    stft_frames,
)
from decaycoh.rirsim import ImpulseResponseSet

FS = 16000.0


def noise(n, channels=2, seed=0):
    return np.random.default_rng(seed).standard_normal((channels, n))


def test_segment_examples():
    cfg = EstimationConfig()
    spans = segment_intervals(ImpulseResponseSet(np.zeros((2, 6400)), FS), cfg)
    assert [(s.start, s.stop) for s in spans] == [(0, 1600), (1600, 3200), (3200, 4800), (4800, 6400)]
    assert len(segment_intervals(ImpulseResponseSet(np.zeros((2, 1600)), FS), cfg)) == 1
    with pytest.raises(ValidationError):
        segment_intervals(ImpulseResponseSet(np.zeros((2, 800)), FS), cfg)


def test_trailing_remainder_is_dropped():
    spans = segment_intervals(ImpulseResponseSet(np.zeros((2, 5000)), FS), EstimationConfig())
    assert len(spans) == 3


def test_frame_count():
    # floor((1600 - 1024) / 256) + 1
    assert stft_frames(np.ones(1600), EstimationConfig()).shape == (3, 513)


def test_zero_segment_gives_zero_spectra():
    assert not np.any(stft_frames(np.zeros(2048), EstimationConfig()))


def test_bin_centred_sinusoid_concentrates_energy():
    cfg = EstimationConfig(window="boxcar", window_length=1024, nfft=1024)
    n = np.arange(2048)
    spectra = stft_frames(np.cos(2 * np.pi * 37 * n / 1024), cfg)
    power = np.abs(spectra) ** 2
    assert np.all(np.argmax(power, axis=1) == 37)
    assert np.all(power[:, 37] / power.sum(axis=1) > 1 - 1e-12)


def test_config_validation():
    with pytest.raises(ValidationError):
        EstimationConfig(overlap=1.0)
    with pytest.raises(ValidationError):
        EstimationConfig(window_length=1024, nfft=512)
    with pytest.raises(ValidationError):
        EstimationConfig(interval=0.05, window_length=1024).interval_samples(FS)


def test_identical_channels_give_exactly_one():
    x = noise(1600, 1)
    ir = ImpulseResponseSet(np.vstack([x, x]), FS)
    res = estimate_interval_coherence(ir, range(0, 1600), EstimationConfig())
    assert res.valid.all()
    assert np.all(res.coherence == 1 + 0j)


def test_independent_noise_is_incoherent():
    cfg = EstimationConfig(interval=(999 * 256 + 1024) / FS)
    ir = ImpulseResponseSet(noise(999 * 256 + 1024, seed=4), FS)
    res = estimate_all(ir, cfg)[0]
    assert res.n_frames == 1000
    assert np.mean(np.abs(res.coherence) < 0.1) >= 0.95


def test_delayed_channel_gives_linear_phase():
    tau = 3
    x = noise(40000, 1, seed=2)[0]
    data = np.vstack([x[tau:], x[:-tau]])   # second channel lags the first by tau
    cfg = EstimationConfig(interval=data.shape[1] / FS)
    res = estimate_all(ImpulseResponseSet(data, FS), cfg)[0]
    omega = 2 * np.pi * res.frequencies / FS
    expected = np.exp(-1j * omega * tau)
    band = slice(1, -1)
    assert np.median(np.abs(res.coherence[band])) > 0.99
    assert np.max(np.abs(res.coherence[band] - expected[band])) < 0.05


def test_single_pair_equals_scipy_welch():
    x = noise(16000, seed=5)
    cfg = EstimationConfig(interval=1.0)
    res = estimate_all(ImpulseResponseSet(x, FS), cfg)[0]
    kw = dict(fs=FS, window="hann", nperseg=1024, noverlap=768, nfft=1024, detrend=False)
    _, pxy = signal.csd(x[0], x[1], **kw)
    _, pxx = signal.welch(x[0], **kw)
    _, pyy = signal.welch(x[1], **kw)
    np.testing.assert_allclose(res.coherence, pxy / np.sqrt(pxx * pyy), atol=1e-10)
    _, msc = signal.coherence(x[0], x[1], **kw)
    np.testing.assert_allclose(np.abs(res.coherence) ** 2, msc, atol=1e-10)


def test_time_reversal_conjugates():
    n = 1024 + 4 * 256       # frame grid is symmetric under reversal
    x = noise(n, seed=6)
    # the periodic Hann window is not mirror symmetric; a boxcar is
    cfg = EstimationConfig(interval=n / FS, window="boxcar")
    fwd = estimate_all(ImpulseResponseSet(x, FS), cfg)[0].coherence
    rev = estimate_all(ImpulseResponseSet(x[:, ::-1], FS), cfg)[0].coherence
    np.testing.assert_allclose(rev, np.conj(fwd), atol=1e-9)


def test_common_scaling_is_invariant():
    x = noise(3200, 3, seed=7)
    cfg = EstimationConfig()
    a = estimate_all(ImpulseResponseSet(x, FS), cfg)
    b = estimate_all(ImpulseResponseSet(37.5 * x, FS), cfg)
    for ra, rb in zip(a, b):
        np.testing.assert_allclose(ra.coherence, rb.coherence, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 1600), elements=st.floats(-1e3, 1e3)))
def test_magnitude_never_exceeds_one(data):
    res = estimate_interval_coherence(ImpulseResponseSet(data, FS), range(0, 1600),
                                      EstimationConfig())
    mag = np.abs(res.coherence[res.valid])
    assert np.all(mag <= 1.0 + 1e-9)


def test_pair_averaging_pools_spectra():
    x = noise(1600, 3, seed=8)
    cfg = EstimationConfig()
    spectra = stft_frames(x, cfg)
    pooled, _ = coherence_from_spectra(spectra, [(0, 1), (1, 2)])
    cross = (np.conj(spectra[0]) * spectra[1] + np.conj(spectra[1]) * spectra[2]).sum(0)
    p1 = (np.abs(spectra[0]) ** 2 + np.abs(spectra[1]) ** 2).sum(0)
    p2 = (np.abs(spectra[1]) ** 2 + np.abs(spectra[2]) ** 2).sum(0)
    np.testing.assert_allclose(pooled, cross / np.sqrt(p1 * p2), atol=1e-12)
    res = estimate_interval_coherence(ImpulseResponseSet(x, FS), range(0, 1600), cfg)
    assert res.n_pairs == 2 and res.n_frames == 3


def test_silent_bins_are_flagged():
    x = np.zeros((2, 1600))
    res = estimate_interval_coherence(ImpulseResponseSet(x, FS), range(0, 1600), EstimationConfig())
    assert not res.valid.any()
    assert np.all(np.isnan(res.coherence))


def test_single_channel_rejected():
    with pytest.raises(ValidationError):
        estimate_all(ImpulseResponseSet(noise(1600, 1), FS), EstimationConfig())


def test_mixed_pair_geometry_rejected_unless_allowed():
    mics = [[1, 1, 1], [1.08, 1, 1], [1.2, 1, 1]]
    ir = ImpulseResponseSet(noise(1600, 3), FS, metadata={"mics": mics})
    with pytest.raises(ValidationError, match="spacing or orientation"):
        estimate_all(ir, EstimationConfig())
    res = estimate_all(ir, EstimationConfig(allow_mixed_pairs=True))
    assert res[0].n_pairs == 2


def test_explicit_pairs():
    ir = ImpulseResponseSet(noise(1600, 4), FS)
    res = estimate_all(ir, EstimationConfig(pairs=((0, 2),)))
    assert res[0].n_pairs == 1
    with pytest.raises(ValidationError):
        estimate_all(ir, EstimationConfig(pairs=((0, 5),)))
