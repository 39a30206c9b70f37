import numpy as np
import pytest

from avsf.features import (
    FeatureFrames,
    MfccConfig,
    MfccExtractor,
    mel_filterbank,
    mfcc,
    normalize_features,
    stack_frames,
    waveform_to_embedding,
)
from avsf.io import AudioWaveform


def _wave(samples, rate=16000):
    return AudioWaveform(sample_rate=rate, samples=np.asarray(samples, dtype=np.float64))


def _sine(freq, seconds=1.0, rate=16000, amp=0.5):
    t = np.arange(int(seconds * rate)) / rate
    return _wave(amp * np.sin(2 * np.pi * freq * t), rate)


def test_frame_count_one_second():
    feats = mfcc(_sine(440.0))
    # floor((16000 - 400) / 160) + 1
    assert feats.frames == 98
    assert feats.dim == 13
    assert feats.rate_hz == 100.0


def test_frame_count_formula_random_lengths():
    rng = np.random.default_rng(3)
    cfg = MfccConfig()
    for _ in range(20):
        n = int(rng.integers(400, 40000))
        feats = mfcc(_wave(rng.normal(scale=0.1, size=n)), cfg)
        assert feats.frames == (n - 400) // 160 + 1


def test_all_zero_waveform_is_dct_of_log_floor():
    cfg = MfccConfig()
    feats = mfcc(_wave(np.zeros(16000)), cfg)
    # every mel energy floors to log(1e-10); DCT-II of a constant vector has
    # only coefficient 0 nonzero: c * sqrt(n_mels) under the orthonormal norm
    expected_c0 = np.log(cfg.log_floor) * np.sqrt(cfg.n_mels)
    assert np.allclose(feats.data[:, 0], expected_c0, atol=1e-9)
    assert np.allclose(feats.data[:, 1:], 0.0, atol=1e-9)


def test_sine_energy_concentrates_at_its_mel_filter():
    # independent oracle: explicit DFT + an independently built filterbank
    cfg = MfccConfig()
    freq = 1000.0
    wave = _sine(freq)
    x = wave.samples.copy()
    emph = np.concatenate([[x[0]], x[1:] - 0.97 * x[:-1]])
    win = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(400) / 400)
    frame = emph[1600:2000] * win  # one frame away from the edges
    k = np.arange(cfg.n_fft // 2 + 1)
    n = np.arange(cfg.n_fft)
    padded = np.zeros(cfg.n_fft)
    padded[:400] = frame
    dft = np.exp(-2j * np.pi * k[:, None] * n[None, :] / cfg.n_fft) @ padded
    mag = np.abs(dft)

    def mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def imel(m):
        return 700.0 * (10 ** (m / 2595.0) - 1.0)

    edges = imel(np.linspace(mel(0.0), mel(8000.0), cfg.n_mels + 2))
    freqs = k * cfg.sample_rate / cfg.n_fft
    energies = np.zeros(cfg.n_mels)
    for m in range(cfg.n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        w = np.clip(np.minimum((freqs - lo) / (mid - lo), (hi - freqs) / (hi - mid)), 0, None)
        energies[m] = (w * mag).sum()
    oracle_peak = int(np.argmax(energies))

    # the filter whose triangle peaks nearest 1 kHz should dominate
    centers = edges[1:-1]
    assert abs(centers[oracle_peak] - freq) == np.min(np.abs(centers - freq))

    # and the implementation's filterbank energies agree with the oracle
    fb = mel_filterbank(cfg)
    impl_energies = fb @ mag
    assert np.allclose(impl_energies, energies, rtol=1e-10, atol=1e-12)


def test_amplitude_scaling_shifts_only_c0():
    wave = _sine(440.0, seconds=0.5)
    base = mfcc(wave)
    scaled = mfcc(_wave(3.7 * wave.samples))
    diff = scaled.data - base.data
    # the shift is the same vector at every frame, zero beyond coefficient 0
    assert np.allclose(diff, diff[0], atol=1e-9)
    assert np.allclose(diff[:, 1:], 0.0, atol=1e-9)
    assert diff[0, 0] > 0


def test_mfcc_errors():
    with pytest.raises(ValueError, match="too short"):
        mfcc(_wave(np.zeros(399)))
    with pytest.raises(ValueError, match="sample rate"):
        mfcc(_wave(np.zeros(16000), rate=8000))


def test_stack_frames_counts_and_order():
    data = np.arange(98 * 13, dtype=np.float64).reshape(98, 13)
    stacked = stack_frames(FeatureFrames(rate_hz=100.0, data=data), k=4)
    assert stacked.frames == 24
    assert stacked.dim == 52
    assert stacked.rate_hz == 25.0
    # frame t is the concatenation of input frames 4t..4t+3 in order
    assert np.array_equal(stacked.data[1], data[4:8].ravel())


def test_stack_four_frames_to_one():
    data = np.arange(4 * 3, dtype=np.float64).reshape(4, 3)
    stacked = stack_frames(FeatureFrames(rate_hz=100.0, data=data), k=4)
    assert stacked.frames == 1
    assert np.array_equal(stacked.data[0], data.ravel())


def test_stack_too_few_frames():
    with pytest.raises(ValueError, match="stack"):
        stack_frames(FeatureFrames(rate_hz=100.0, data=np.zeros((3, 13))), k=4)


def test_stack_then_slice_recovers_prefix():
    rng = np.random.default_rng(5)
    for T in (4, 7, 98, 101):
        data = rng.normal(size=(T, 13))
        stacked = stack_frames(FeatureFrames(rate_hz=100.0, data=data), k=4)
        unstacked = stacked.data.reshape(-1, 13)
        assert np.array_equal(unstacked, data[: 4 * (T // 4)])


def test_normalize_features_zero_mean_unit_var():
    rng = np.random.default_rng(6)
    feats = FeatureFrames(rate_hz=25.0, data=rng.normal(3.0, 2.0, size=(50, 8)))
    normed = normalize_features(feats)
    assert np.allclose(normed.data.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(normed.data.std(axis=0), 1.0, atol=1e-12)


def test_waveform_to_embedding_shape_and_modality():
    seq = waveform_to_embedding(_sine(440.0), stack=4, normalize=False)
    assert seq.modality == "audio"
    assert seq.fps == 25.0
    assert seq.frames == 24
    assert seq.dim == 52


def test_mfcc_extractor_sklearn_surface():
    est = MfccExtractor(normalize=False)
    params = est.get_params()
    assert params["stack"] == 4
    out = est.fit_transform(_sine(440.0).samples)
    assert out.shape == (24, 52)
