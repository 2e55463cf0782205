import numpy as np
import pytest
from scipy import signal

from convbf.audio_io import AudioBuffer
from convbf.errors import SizeError
from convbf.metrics import (active_frames, cepstral_distance, evaluate, format_metric_rows,
                            fwssnr, lpc, lpc_cepstrum, mel_filterbank)


def _buf(x):
    return AudioBuffer(x, 16000)


def fft_cepstrum(a, n_coeffs, n_fft=8192):
    """Real cepstrum of 1/A(z) computed numerically: ifft(-log|A|) doubled."""
    spec = np.fft.fft(np.concatenate([[1.0], a]), n_fft)
    c = np.fft.ifft(-np.log(np.abs(spec))).real
    return 2 * c[1:n_coeffs + 1]


def test_lpc_recovers_ar_process(rng):
    a_true = np.array([-1.2, 0.8, -0.2])
    x = signal.lfilter([1.0], np.concatenate([[1.0], a_true]), rng.standard_normal(20000))
    np.testing.assert_allclose(lpc(x, 3), a_true, atol=0.03)
    np.testing.assert_array_equal(lpc(np.zeros(64)), np.zeros(12))


@pytest.mark.parametrize("n_coeffs", [12, 20])
def test_cepstral_recursion_matches_fft_oracle(rng, n_coeffs):
    x = signal.lfilter([1.0], [1.0, -0.9, 0.5], rng.standard_normal(512))
    a = lpc(x * np.hamming(512))
    np.testing.assert_allclose(lpc_cepstrum(a, n_coeffs), fft_cepstrum(a, n_coeffs), atol=1e-9)


def test_cepstral_distance_identity_and_scale(rng):
    x = signal.lfilter([1.0], [1.0, -0.9], rng.standard_normal(16000))
    assert cepstral_distance(_buf(x), _buf(x)) == 0.0
    # gain is excluded from the cepstral model
    assert cepstral_distance(_buf(x), _buf(3.0 * x)) == pytest.approx(0.0, abs=1e-6)
    noisy = x + 0.5 * rng.standard_normal(x.size)
    d = cepstral_distance(_buf(x), _buf(noisy))
    assert 0 < d <= 10.0


def test_fwssnr_limits(rng):
    x = rng.standard_normal(16000)
    # perfect estimate hits the upper clamp; zero estimate gives 0 dB in every band
    assert fwssnr(_buf(x), _buf(x)) == pytest.approx(35.0)
    assert fwssnr(_buf(x), _buf(np.zeros_like(x))) == pytest.approx(0.0, abs=1e-12)
    assert fwssnr(_buf(x), _buf(-x)) == pytest.approx(-6.0206, abs=1e-3)
    assert fwssnr(_buf(x), _buf(x + 0.1 * rng.standard_normal(x.size))) > 15.0


def test_active_frames():
    frames = np.array([[1.0] * 4, [1e-3] * 4, [1e-1] * 4])
    # energies 4, 4e-6, 4e-2: -60 dB frame is dropped, -20 dB kept
    np.testing.assert_array_equal(active_frames(frames), [True, False, True])
    assert not active_frames(np.zeros((2, 3))).any()


def test_mel_filterbank_shape():
    bank = mel_filterbank(25, 512, 16000)
    assert bank.shape == (25, 257)
    assert np.all(bank >= 0) and np.all(bank.max(axis=1) > 0.5)
    assert bank[:, 0].sum() == 0.0


def test_errors_and_csv(rng):
    x = rng.standard_normal(2000)
    with pytest.raises(SizeError):
        evaluate(_buf(x), _buf(x[:1000]))
    with pytest.raises(SizeError):
        evaluate(_buf(np.stack([x, x])), _buf(x))
    rep = evaluate(_buf(x), _buf(x))
    text = format_metric_rows([("u1", "wpd", rep)])
    assert text.splitlines() == ["utterance,method,cd,fwssnr", "u1,wpd,0.000000,35.000000"]
