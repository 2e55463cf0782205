"""Synthetic reverberant, noisy multichannel scenes with known components.

Impulse responses are a unit direct-path impulse per microphone followed by
an exponentially decaying Gaussian tail whose energy falls 60 dB over T60.
The mixture is ``desired + late + noise`` where ``desired`` is the source
convolved with the first ``early_ms`` of each response and ``late`` with the
remainder.
"""
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .audio_io import AudioBuffer, write_wav


@dataclass(frozen=True)
class SceneSpec:
    channels: int = 8
    t60: float = 0.5
    snr_db: float = 20.0
    early_ms: float = 32.0
    duration_s: float = 3.0
    head_s: float = 0.25
    tail_s: float = None
    seed: int = 0
    sample_rate: int = 16000
    noise_color: str = "white"
    delay_spread_ms: float = 2.0
    tail_level: float = 0.03

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.t60 <= 0:
            raise ValueError("t60 must be positive")
        if self.early_ms <= 0:
            raise ValueError("early_ms must be positive")
        if self.head_s < 0.225:
            raise ValueError("head silence must be at least 225 ms")
        if self.tail_s is not None and self.tail_s < 0.075:
            raise ValueError("tail silence must be at least 75 ms")
        if self.noise_color not in ("white", "pink"):
            raise ValueError(f"unknown noise colour {self.noise_color!r}")

    @property
    def tail_seconds(self):
        # long enough for the reverberant tail to die out before the noise-only end
        return self.tail_s if self.tail_s is not None else 0.075 + self.t60

    @property
    def head_samples(self):
        return int(round(self.head_s * self.sample_rate))

    @property
    def speech_samples(self):
        return int(round(self.duration_s * self.sample_rate))

    @property
    def total_samples(self):
        return (self.head_samples + self.speech_samples
                + int(round(self.tail_seconds * self.sample_rate)))


@dataclass
class RoomScene:
    spec: SceneSpec
    clean: AudioBuffer
    atfs: np.ndarray
    delays: np.ndarray
    mixture: AudioBuffer
    desired: AudioBuffer
    late: AudioBuffer
    noise: AudioBuffer
    early_samples: int = field(default=0)

    @property
    def t60(self):
        return self.spec.t60

    @property
    def snr_db(self):
        return self.spec.snr_db

    @property
    def seed(self):
        return self.spec.seed

    def measured_snr_db(self):
        speech = self.desired.samples + self.late.samples
        noise_energy = np.sum(self.noise.samples ** 2)
        if noise_energy == 0:
            return np.inf
        return 10 * np.log10(np.sum(speech ** 2) / noise_energy)

    def drr_db(self, channel=0):
        """Early-to-late energy ratio of one channel's reverberant speech."""
        return energy_ratio_db(self.desired.samples[channel], self.late.samples[channel])


def energy_ratio_db(num, den):
    return float(10 * np.log10(np.sum(num ** 2) / np.sum(den ** 2)))


def generate_rir(channels, t60, delay_spread=0.002, seed=0, sample_rate=16000,
                 tail_level=0.03, length=None):
    """Decaying-noise impulse responses, shape (channels, length).

    Returns ``(rirs, delays)`` with integer direct-path delays in samples.
    """
    if t60 <= 0:
        raise ValueError("t60 must be positive")
    rng = np.random.default_rng(seed)
    max_delay = int(round(delay_spread * sample_rate))
    delays = rng.integers(0, max_delay + 1, size=channels)
    tail_len = int(np.ceil(1.2 * t60 * sample_rate)) + 1
    if length is None:
        length = max_delay + tail_len + 1
    rirs = np.zeros((channels, length))
    n = np.arange(1, tail_len)
    envelope = tail_level * 10.0 ** (-3.0 * n / (t60 * sample_rate))
    for m in range(channels):
        rirs[m, delays[m]] = 1.0
        tail = rng.standard_normal(n.size) * envelope
        stop = min(length, delays[m] + 1 + n.size)
        rirs[m, delays[m] + 1:stop] = tail[:stop - delays[m] - 1]
    return rirs, delays


def speech_like_source(duration_s, sample_rate=16000, seed=0, peak=0.5):
    """Syllable-like bursts of formant-filtered voiced or fricative excitation.

    Voiced bursts are a jittered glottal pulse train plus aspiration noise;
    unvoiced bursts are noise with a high-frequency emphasis. Each burst gets
    its own bank of four parallel formant resonators and a tapered amplitude contour.
    """
    rng = np.random.default_rng(seed)
    n_total = int(round(duration_s * sample_rate))
    out = np.zeros(n_total)
    pos = int(rng.uniform(0.0, 0.03) * sample_rate)
    nyq = sample_rate / 2.0
    while pos < n_total:
        n = min(int(rng.uniform(0.12, 0.35) * sample_rate), n_total - pos)
        if n < 64:
            break
        voiced = rng.random() < 0.75
        if voiced:
            f0 = rng.uniform(90.0, 220.0) * (1 + 0.1 * np.linspace(-1, 1, n) * rng.uniform(-1, 1))
            f0 *= 1 + 0.01 * rng.standard_normal(n)
            phase = np.cumsum(f0 / sample_rate)
            excitation = np.diff(np.floor(phase), prepend=0.0) * np.sqrt(sample_rate / f0)
            # glottal roll-off
            excitation = signal.lfilter([1.0], [1.0, -0.6], excitation)
            excitation += 0.3 * np.std(excitation) * rng.standard_normal(n)
        else:
            excitation = signal.lfilter([1.0, -0.7], [1.0], rng.standard_normal(n))
        burst = np.zeros(n)
        formants = ((250.0, 900.0, 0.0), (900.0, 2500.0, -6.0), (2300.0, 3500.0, -12.0),
                    (3500.0, min(6000.0, nyq * 0.9), -15.0))
        for lo, hi, gain_db in formants:
            fc = rng.uniform(lo, hi)
            r = np.exp(-np.pi * rng.uniform(100.0, 400.0) / sample_rate)
            a = [1.0, -2 * r * np.cos(2 * np.pi * fc / sample_rate), r * r]
            peak_gain = np.abs(signal.freqz([1.0], a, worN=[fc], fs=sample_rate)[1][0])
            burst += 10 ** (gain_db / 20) / peak_gain * signal.lfilter([1.0], a, excitation)
        burst *= signal.windows.tukey(n, 0.4) * rng.uniform(0.4, 1.0) / (np.std(burst) + 1e-12)
        out[pos:pos + n] += burst
        pos += n + int(rng.uniform(0.01, 0.08) * sample_rate)
    sos = signal.butter(2, [60.0, min(7600.0, 0.95 * nyq)], btype="bandpass",
                        fs=sample_rate, output="sos")
    out = signal.sosfilt(sos, out)
    scale = np.abs(out).max()
    return out * (peak / scale) if scale > 0 else out


def _noise(rng, shape, color):
    x = rng.standard_normal(shape)
    if color == "pink":
        spec = np.fft.rfft(x, axis=-1)
        k = np.arange(spec.shape[-1])
        k[0] = 1
        x = np.fft.irfft(spec / np.sqrt(k), n=shape[-1], axis=-1)
    return x


def mix_scene(spec, clean=None):
    """Build a :class:`RoomScene`.

    ``clean`` is a 1-channel source of at least ``spec.duration_s``; when
    omitted a speech-like source is generated from ``spec.seed``. The source
    is placed between ``head_s`` and ``tail_seconds`` of silence, so only
    noise is present at the beginning and end.
    """
    sr = spec.sample_rate
    n_speech = spec.speech_samples
    if clean is None:
        src = speech_like_source(spec.duration_s, sr, seed=spec.seed + 7919)
    else:
        if clean.sample_rate != sr:
            raise ValueError("clean source sample rate does not match the scene")
        src = clean.samples[0]
        if src.size < n_speech:
            raise ValueError(f"clean source has {src.size} samples, need {n_speech}")
        src = src[:n_speech]
    n_total = spec.total_samples
    s = np.zeros(n_total)
    s[spec.head_samples:spec.head_samples + n_speech] = src

    rirs, delays = generate_rir(spec.channels, spec.t60, spec.delay_spread_ms / 1000.0,
                                seed=spec.seed, sample_rate=sr, tail_level=spec.tail_level)
    early = min(int(round(spec.early_ms * sr / 1000.0)), rirs.shape[1])
    early_rir = rirs.copy()
    early_rir[:, early:] = 0.0
    late_rir = rirs - early_rir
    desired = np.stack([signal.fftconvolve(s, h)[:n_total] for h in early_rir])
    late = np.stack([signal.fftconvolve(s, h)[:n_total] for h in late_rir])
    # fftconvolve leaves rounding noise where the exact result is zero
    desired[:, :spec.head_samples] = 0.0
    late[:, :spec.head_samples] = 0.0
    if early >= rirs.shape[1]:
        late[:] = 0.0

    rng = np.random.default_rng(spec.seed + 104729)
    if np.isinf(spec.snr_db) and spec.snr_db > 0:
        noise = np.zeros_like(desired)
    else:
        noise = _noise(rng, desired.shape, spec.noise_color)
        speech_energy = np.sum((desired + late) ** 2)
        noise *= np.sqrt(speech_energy / (np.sum(noise ** 2) * 10.0 ** (spec.snr_db / 10.0)))
    mixture = desired + late + noise
    return RoomScene(spec, AudioBuffer(s, sr), rirs, delays, AudioBuffer(mixture, sr),
                     AudioBuffer(desired, sr), AudioBuffer(late, sr), AudioBuffer(noise, sr),
                     early)


def true_rtf(scene, cfg, q=0):
    """RTF of the direct path at every STFT bin, shape (F, M)."""
    k = np.arange(cfg.n_bins)
    rel = scene.delays - scene.delays[q]
    return np.exp(-2j * np.pi * np.outer(k, rel) / cfg.fft_size)


def export_scene(scene, directory, encoding="float32"):
    """Write the mixture and every component as WAV files; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    paths = {}
    for name in ("clean", "mixture", "desired", "late", "noise"):
        path = os.path.join(directory, f"{name}.wav")
        write_wav(path, getattr(scene, name), encoding)
        paths[name] = path
    return paths
