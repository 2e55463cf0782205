import numpy as np
import pytest

from convbf.audio_io import AudioBuffer
from convbf.stft import MultichannelSpectrogram, StftConfig

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def report(criterion, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_spec(rng, channels=2, frames=40, frame_len=16, hop=4):
    """Random complex spectrogram with a tiny frame so per-bin work is cheap."""
    cfg = StftConfig(frame_len, hop, 16000)
    return MultichannelSpectrogram(crandn(rng, channels, frames, cfg.n_bins), cfg)


def random_hpd(rng, d, cond=10.0):
    q, _ = np.linalg.qr(crandn(rng, d, d))
    eig = np.geomspace(1.0, cond, d)
    return (q * eig) @ q.conj().T


def tone_buffer(channels=2, seconds=1.0, sr=16000, seed=0):
    rng = np.random.default_rng(seed)
    return AudioBuffer(0.1 * rng.standard_normal((channels, int(seconds * sr))), sr)
