import numpy as np
import pytest

from convbf.audio_io import read_wav
from convbf.simulate import (SceneSpec, export_scene, generate_rir, mix_scene,
                             speech_like_source, true_rtf)
from convbf.stft import StftConfig


@pytest.mark.parametrize("t60", [0.3, 0.6])
def test_rir_decay_matches_t60(t60):
    rirs, delays = generate_rir(4, t60, seed=2, tail_level=0.05)
    sr = 16000
    # Schroeder backward integration of the tail, fit between -5 and -25 dB
    slopes = []
    for m in range(4):
        tail = rirs[m, delays[m] + 1:]
        edc = np.cumsum(tail[::-1] ** 2)[::-1]
        edc = edc[edc > 0]
        edc_db = 10 * np.log10(edc / edc[0])
        sel = (edc_db <= -5) & (edc_db >= -25)
        slope = np.polyfit(np.flatnonzero(sel) / sr, edc_db[sel], 1)[0]
        slopes.append(-60.0 / slope)
    est = np.mean(slopes)
    assert 10 * np.log10(est / t60) == pytest.approx(0.0, abs=1.0)


def test_rir_direct_path():
    rirs, delays = generate_rir(3, 0.4, delay_spread=0.002, seed=1)
    assert np.all(delays <= 32)
    for m in range(3):
        assert rirs[m, delays[m]] == 1.0
        assert np.all(rirs[m, :delays[m]] == 0)
    with pytest.raises(ValueError):
        generate_rir(2, 0.0)


def test_scene_components_add_up():
    spec = SceneSpec(channels=3, t60=0.4, snr_db=15, duration_s=1.0, seed=5)
    scene = mix_scene(spec)
    total = scene.desired.samples + scene.late.samples + scene.noise.samples
    np.testing.assert_allclose(scene.mixture.samples, total, atol=1e-12)
    assert scene.measured_snr_db() == pytest.approx(15.0, abs=1e-9)
    # leading and trailing spans hold noise only
    head = spec.head_samples
    assert np.all(scene.desired.samples[:, :head] == 0)
    assert np.all(scene.late.samples[:, :head] == 0)
    assert scene.mixture.length == spec.total_samples
    assert scene.early_samples == 512


def test_scene_is_deterministic_and_noiseless_option():
    spec = SceneSpec(channels=2, duration_s=0.5, seed=9, snr_db=np.inf)
    a, b = mix_scene(spec), mix_scene(spec)
    np.testing.assert_array_equal(a.mixture.samples, b.mixture.samples)
    assert np.all(a.noise.samples == 0) and a.measured_snr_db() == np.inf


def test_source_properties():
    x = speech_like_source(2.0, seed=4)
    assert x.size == 32000 and np.max(np.abs(x)) == pytest.approx(0.5)
    # most energy below 4 kHz but the upper band is not empty
    spec = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(x.size, 1 / 16000)
    hi = spec[freqs > 4000].sum() / spec.sum()
    assert 1e-4 < hi < 0.5


def test_true_rtf_anechoic_phase():
    scene = mix_scene(SceneSpec(channels=3, duration_s=0.5, seed=1, tail_level=0.0))
    cfg = StftConfig()
    v = true_rtf(scene, cfg, q=0)
    assert v.shape == (257, 3)
    np.testing.assert_allclose(v[:, 0], 1.0)
    np.testing.assert_allclose(np.abs(v), 1.0)
    assert np.all(scene.late.samples == 0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SceneSpec(head_s=0.1)
    with pytest.raises(ValueError):
        SceneSpec(noise_color="brown")
    assert SceneSpec(t60=0.5).tail_seconds == pytest.approx(0.575)


def test_export(tmp_path):
    scene = mix_scene(SceneSpec(channels=2, duration_s=0.5, seed=0))
    paths = export_scene(scene, str(tmp_path / "s"))
    assert set(paths) == {"clean", "mixture", "desired", "late", "noise"}
    back = read_wav(paths["mixture"])
    np.testing.assert_allclose(back.samples, scene.mixture.samples, atol=1e-7)
