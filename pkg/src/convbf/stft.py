"""STFT analysis and weighted overlap-add synthesis.

Coefficients are stored as ``(channels, frames, bins)``. Frame ``t`` covers
samples ``[t * hop, t * hop + frame_len)``; no padding is applied, so
``T = 1 + (N - frame_len) // hop``. Synthesis divides by the accumulated
squared window, which gives exact reconstruction wherever that sum is
non-negligible (everything except the first and last ``hop`` samples or so,
and any tail samples not covered by a full frame).
"""
from dataclasses import dataclass, field

import numpy as np

from .audio_io import AudioBuffer
from .errors import SizeError


@dataclass(frozen=True)
class StftConfig:
    frame_len: int = 512
    hop: int = 128
    sample_rate: int = 16000
    window: str = "hann"

    def __post_init__(self):
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")
        if self.frame_len % self.hop:
            raise ValueError("hop must divide frame_len")
        if self.frame_len // self.hop < 2:
            raise ValueError("hann window needs at least 50% overlap")

    @classmethod
    def from_ms(cls, frame_ms=32.0, hop_ms=8.0, sample_rate=16000):
        return cls(int(round(frame_ms * sample_rate / 1000)),
                   int(round(hop_ms * sample_rate / 1000)), sample_rate)

    @property
    def fft_size(self):
        return self.frame_len

    @property
    def n_bins(self):
        return self.frame_len // 2 + 1

    def window_array(self):
        # periodic hann: COLA at any hop dividing frame_len / 2
        n = np.arange(self.frame_len)
        return 0.5 - 0.5 * np.cos(2 * np.pi * n / self.frame_len)

    def bin_frequencies(self):
        return np.arange(self.n_bins) * self.sample_rate / self.fft_size

    def n_frames(self, n_samples):
        if n_samples < self.frame_len:
            raise SizeError(f"signal of {n_samples} samples is shorter than one frame ({self.frame_len})")
        return 1 + (n_samples - self.frame_len) // self.hop

    def cola_gain(self):
        """Constant value of sum_k w^2(n - k*hop) in the fully-overlapped interior."""
        w2 = self.window_array() ** 2
        return float(w2.reshape(-1, self.hop).sum(axis=0)[0])


@dataclass
class MultichannelSpectrogram:
    coeffs: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)
    length: int = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 3 or c.shape[2] != self.config.n_bins:
            raise SizeError(f"expected (M, T, {self.config.n_bins}) coefficients, got {c.shape}")
        self.coeffs = c
        if self.length is None:
            self.length = (c.shape[1] - 1) * self.config.hop + self.config.frame_len

    @property
    def channels(self):
        return self.coeffs.shape[0]

    @property
    def frames(self):
        return self.coeffs.shape[1]

    @property
    def bins(self):
        return self.coeffs.shape[2]

    def bin_view(self, f):
        """Observations of bin ``f`` as a (T, M) array (rows are x_t^T)."""
        return self.coeffs[:, :, f].T

    def with_coeffs(self, coeffs):
        return MultichannelSpectrogram(coeffs, self.config, self.length)

    def scaled(self, c):
        return self.with_coeffs(self.coeffs * c)


def frame_signal(x, frame_len, hop):
    n_frames = 1 + (x.shape[-1] - frame_len) // hop
    idx = hop * np.arange(n_frames)[:, None] + np.arange(frame_len)[None, :]
    return x[..., idx]


def analyze(buf, cfg):
    """Hann-windowed one-sided STFT of every channel of ``buf``."""
    if buf.sample_rate != cfg.sample_rate:
        raise ValueError(f"sample rate {buf.sample_rate} != STFT config rate {cfg.sample_rate}")
    cfg.n_frames(buf.length)
    frames = frame_signal(buf.samples, cfg.frame_len, cfg.hop)
    coeffs = np.fft.rfft(frames * cfg.window_array(), n=cfg.fft_size, axis=-1)
    return MultichannelSpectrogram(coeffs, cfg, buf.length)


def _overlap_add(frames, hop, length):
    frame_len = frames.shape[-1]
    out = np.zeros(frames.shape[:-2] + (length,))
    for t in range(frames.shape[-2]):
        start = t * hop
        stop = min(start + frame_len, length)
        out[..., start:stop] += frames[..., t, :stop - start]
    return out


def synthesis_normalizer(cfg, n_frames, length):
    w2 = np.broadcast_to(cfg.window_array() ** 2, (n_frames, cfg.frame_len))
    return _overlap_add(w2, cfg.hop, length)


def synthesize(spec):
    """Weighted overlap-add inverse of :func:`analyze`.

    Output has ``spec.length`` samples. Samples whose accumulated squared
    window falls below 1e-3 of the interior value are scaled by the interior
    constant instead, to avoid amplifying edge errors.
    """
    cfg = spec.config
    frames = np.fft.irfft(spec.coeffs, n=cfg.fft_size, axis=-1)[..., :cfg.frame_len]
    frames = frames * cfg.window_array()
    out = _overlap_add(frames, cfg.hop, spec.length)
    norm = synthesis_normalizer(cfg, spec.frames, spec.length)
    floor = 1e-3 * cfg.cola_gain()
    norm = np.where(norm > floor, norm, cfg.cola_gain())
    return AudioBuffer(out / norm, cfg.sample_rate)


def interior_slice(cfg, length):
    """Sample range excluded from edge effects: drop ``frame_len`` at each end."""
    return slice(cfg.frame_len, max(cfg.frame_len, length - cfg.frame_len))
