"""MFCC extraction and 4-frame stacking: 16 kHz waveform -> 25 Hz feature frames.

Pipeline: pre-emphasis 0.97 -> periodic Hann window -> magnitude FFT
-> triangular mel filterbank (HTK scale) -> log with floor -> orthonormal
DCT-II, keeping the first n_coeffs coefficients. 100 Hz frames (10 ms hop) are
stacked in groups of 4 to align with 25 fps video.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .io import EmbeddingSequence
from .validation import check_finite


@dataclass
class MfccConfig:
    sample_rate: int = 16000
    window_ms: float = 25.0
    hop_ms: float = 10.0
    n_fft: int = 512
    n_mels: int = 26
    n_coeffs: int = 13
    mel_fmin: float = 0.0
    mel_fmax: float = 8000.0
    log_floor: float = 1e-10
    preemphasis: float = 0.97

    @property
    def window_samples(self):
        return int(round(self.window_ms * self.sample_rate / 1000.0))

    @property
    def hop_samples(self):
        return int(round(self.hop_ms * self.sample_rate / 1000.0))

    def validate(self, video_fps=25.0, stack=4):
        if self.n_coeffs > self.n_mels:
            raise ValueError("n_coeffs must be <= n_mels")
        if self.n_fft < self.window_samples:
            raise ValueError("n_fft must cover the analysis window")
        # stack hops must tile one video frame (4 x 10 ms = 40 ms at 25 fps)
        if abs(stack * self.hop_ms - 1000.0 / video_fps) > 1e-9:
            raise ValueError(
                f"{stack} hops of {self.hop_ms} ms do not equal one "
                f"{1000.0 / video_fps} ms video frame"
            )
        return self


@dataclass
class FeatureFrames:
    rate_hz: float
    data: np.ndarray  # (frames, dim)

    @property
    def frames(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg):
    """(n_mels, n_fft//2+1) triangular weights sampled at the FFT bin centers."""
    edges_mel = np.linspace(hz_to_mel(cfg.mel_fmin), hz_to_mel(cfg.mel_fmax), cfg.n_mels + 2)
    edges = mel_to_hz(edges_mel)
    bin_freqs = np.arange(cfg.n_fft // 2 + 1) * (cfg.sample_rate / cfg.n_fft)
    fb = np.zeros((cfg.n_mels, bin_freqs.size))
    for m in range(cfg.n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (bin_freqs - lo) / (mid - lo)
        falling = (hi - bin_freqs) / (hi - mid)
        fb[m] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


def dct_ii_matrix(n_out, n_in):
    """Orthonormal DCT-II matrix mapping n_in log-energies to n_out coefficients."""
    k = np.arange(n_out)[:, None]
    n = np.arange(n_in)[None, :]
    mat = np.cos(np.pi * k * (2 * n + 1) / (2.0 * n_in))
    mat *= np.sqrt(2.0 / n_in)
    mat[0] *= np.sqrt(0.5)
    return mat


def mfcc(wave, cfg=None):
    """Extract MFCC frames at 1000/hop_ms Hz (100 Hz with defaults)."""
    cfg = cfg or MfccConfig()
    if wave.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"sample rate mismatch: waveform {wave.sample_rate} Hz, config {cfg.sample_rate} Hz"
        )
    x = np.asarray(wave.samples, dtype=np.float64)
    check_finite(x, "waveform")
    win, hop = cfg.window_samples, cfg.hop_samples
    if x.size < win:
        raise ValueError(f"waveform too short: {x.size} samples < one {win}-sample window")

    emphasized = np.empty_like(x)
    emphasized[0] = x[0]
    emphasized[1:] = x[1:] - cfg.preemphasis * x[:-1]

    n_frames = (x.size - win) // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = emphasized[idx]

    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win) / win)  # periodic Hann
    spectrum = np.abs(np.fft.rfft(frames * window, n=cfg.n_fft))

    fb = mel_filterbank(cfg)
    energies = spectrum @ fb.T
    log_energies = np.log(np.maximum(energies, cfg.log_floor))

    dct = dct_ii_matrix(cfg.n_coeffs, cfg.n_mels)
    coeffs = log_energies @ dct.T
    return FeatureFrames(rate_hz=1000.0 / cfg.hop_ms, data=coeffs)


def stack_frames(feats, k=4):
    """Concatenate k adjacent frames; trailing remainder frames are dropped."""
    T = feats.frames
    if T < k:
        raise ValueError(f"cannot stack {k} frames from a {T}-frame sequence")
    n_out = T // k
    data = feats.data[: n_out * k].reshape(n_out, k * feats.dim)
    return FeatureFrames(rate_hz=feats.rate_hz / k, data=data)


def normalize_features(feats):
    """Global per-utterance mean/variance normalization (per dimension)."""
    mean = feats.data.mean(axis=0)
    std = feats.data.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return FeatureFrames(rate_hz=feats.rate_hz, data=(feats.data - mean) / std)


def waveform_to_embedding(wave, cfg=None, stack=4, normalize=True):
    """Full pipeline: waveform -> stacked (25 Hz) MFCC as an audio EmbeddingSequence."""
    cfg = (cfg or MfccConfig()).validate(stack=stack)
    feats = mfcc(wave, cfg)
    feats = stack_frames(feats, k=stack)
    if normalize:
        feats = normalize_features(feats)
    return EmbeddingSequence(modality="audio", data=feats.data, fps=feats.rate_hz)


class MfccExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer wrapping the MFCC pipeline for sklearn pipelines.

    transform() takes an AudioWaveform (or a 1-D sample array at the configured
    sample rate) and returns the stacked feature matrix.
    """

    def __init__(self, sample_rate=16000, stack=4, normalize=True):
        self.sample_rate = sample_rate
        self.stack = stack
        self.normalize = normalize

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        from .io import AudioWaveform

        if not isinstance(X, AudioWaveform):
            X = AudioWaveform(sample_rate=self.sample_rate, samples=np.asarray(X))
        cfg = MfccConfig(sample_rate=self.sample_rate)
        seq = waveform_to_embedding(X, cfg, stack=self.stack, normalize=self.normalize)
        return seq.data
