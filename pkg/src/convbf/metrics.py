"""Intrusive quality measures: cepstral distance and frequency-weighted segmental SNR.

Both operate on 32 ms frames with a 16 ms shift and average over
speech-active frames, i.e. frames whose reference energy lies within 40 dB
of the loudest reference frame.
"""
import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_toeplitz

from .errors import SizeError
from .stft import frame_signal

LPC_ORDER = 12
CD_CLAMP = (0.0, 10.0)
SNR_CLAMP = (-10.0, 35.0)
N_BANDS = 25
WEIGHT_EXPONENT = 0.2
ACTIVE_RANGE_DB = 40.0


@dataclass
class MetricReport:
    cd: float
    fwssnr: float
    cd_frames: np.ndarray = None
    fwssnr_frames: np.ndarray = None


def _mono(buf):
    if buf.channels != 1:
        raise SizeError(f"expected a single-channel buffer, got {buf.channels} channels")
    return buf.samples[0]


def _pair(reference, test):
    ref, tst = _mono(reference), _mono(test)
    if reference.sample_rate != test.sample_rate:
        raise ValueError("sample rates differ")
    if ref.size != tst.size:
        raise SizeError(f"length mismatch: {ref.size} vs {tst.size}")
    frame = int(round(0.032 * reference.sample_rate))
    hop = frame // 2
    if ref.size < frame:
        raise SizeError("signals shorter than one analysis frame")
    return frame_signal(ref, frame, hop), frame_signal(tst, frame, hop), frame


def active_frames(ref_frames, range_db=ACTIVE_RANGE_DB):
    energy = np.sum(ref_frames ** 2, axis=1)
    peak = energy.max()
    if peak <= 0:
        return np.zeros(len(energy), dtype=bool)
    return energy >= peak * 10.0 ** (-range_db / 10.0)


def lpc(frame, order=LPC_ORDER):
    """Autocorrelation-method predictor ``a`` with ``A(z) = 1 + sum a_k z^-k``.

    Returns zeros for an all-zero frame (flat spectrum).
    """
    n = frame.size
    r = np.array([np.dot(frame[:n - k], frame[k:]) for k in range(order + 1)])
    if r[0] <= 0:
        return np.zeros(order)
    # tiny lag-0 bump keeps the Toeplitz system solvable for pure tones
    r[0] *= 1.0 + 1e-9
    return -solve_toeplitz(r[:order], r[1:order + 1])


def lpc_cepstrum(a, n_coeffs=LPC_ORDER):
    """Cepstrum ``c_1..c_n`` of the all-pole model ``1 / A(z)`` (gain excluded)."""
    p = a.size
    c = np.zeros(n_coeffs + 1)
    for n in range(1, n_coeffs + 1):
        acc = -a[n - 1] if n <= p else 0.0
        for k in range(1, n):
            if n - k <= p:
                acc -= (k / n) * c[k] * a[n - k - 1]
        c[n] = acc
    return c[1:]


def cepstral_distance(reference, test, return_frames=False):
    """Mean LPC cepstral distance in dB over speech-active frames."""
    ref_fr, tst_fr, frame = _pair(reference, test)
    window = np.hamming(frame)
    dist = np.empty(len(ref_fr))
    for i, (rf, tf) in enumerate(zip(ref_fr, tst_fr)):
        c_ref = lpc_cepstrum(lpc(rf * window))
        c_tst = lpc_cepstrum(lpc(tf * window))
        dist[i] = (10.0 / np.log(10.0)) * np.sqrt(2.0 * np.sum((c_ref - c_tst) ** 2))
    dist = np.clip(dist, *CD_CLAMP)
    active = active_frames(ref_fr)
    value = float(dist[active].mean()) if active.any() else 0.0
    return (value, dist) if return_frames else value


def mel_filterbank(n_bands, n_fft, sample_rate):
    """Triangular filters with centres equally spaced on the mel scale, (bands, bins)."""
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_bands + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    bank = np.zeros((n_bands, freqs.size))
    for j in range(n_bands):
        lo, mid, hi = edges[j:j + 3]
        rise = (freqs - lo) / (mid - lo)
        fall = (hi - freqs) / (hi - mid)
        bank[j] = np.clip(np.minimum(rise, fall), 0.0, None)
    return bank


def fwssnr(reference, test, return_frames=False):
    """Frequency-weighted segmental SNR in dB.

    Per frame and mel band, SNR is the ratio of reference band energy to the
    band energy of the complex spectral error, clamped to [-10, 35] dB, and
    bands are weighted by their reference band magnitude to the power 0.2.
    """
    ref_fr, tst_fr, frame = _pair(reference, test)
    window = np.hanning(frame + 2)[1:-1]
    s = np.fft.rfft(ref_fr * window, axis=1)
    e = np.fft.rfft((ref_fr - tst_fr) * window, axis=1)
    bank = mel_filterbank(N_BANDS, frame, reference.sample_rate)
    s_band = np.abs(s) ** 2 @ bank.T
    e_band = np.abs(e) ** 2 @ bank.T
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = 10.0 * np.log10(s_band / e_band)
    snr = np.where(e_band == 0, SNR_CLAMP[1], snr)
    snr = np.where(s_band == 0, SNR_CLAMP[0], snr)
    snr = np.clip(snr, *SNR_CLAMP)
    weight = s_band ** (WEIGHT_EXPONENT / 2.0)
    total = weight.sum(axis=1)
    frame_val = np.divide((weight * snr).sum(axis=1), total, out=np.zeros_like(total),
                          where=total > 0)
    active = active_frames(ref_fr) & (total > 0)
    value = float(frame_val[active].mean()) if active.any() else SNR_CLAMP[0]
    return (value, frame_val) if return_frames else value


def evaluate(reference, test):
    cd, cd_fr = cepstral_distance(reference, test, return_frames=True)
    fw, fw_fr = fwssnr(reference, test, return_frames=True)
    return MetricReport(cd, fw, cd_fr, fw_fr)


METRIC_FIELDS = ("utterance", "method", "cd", "fwssnr")


def format_metric_rows(rows):
    """CSV text for ``(utterance, method, MetricReport)`` tuples."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(METRIC_FIELDS)
    for utt, method, rep in rows:
        writer.writerow([utt, method, f"{rep.cd:.6f}", f"{rep.fwssnr:.6f}"])
    return out.getvalue()
