"""Multichannel WAV reading and writing.

Samples are held as float64 arrays of shape (channels, length) in [-1, 1].
Integer PCM is scaled by 2**(bits-1), so int16 32767 maps to 32767/32768.
"""
import logging
import os
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .errors import AudioFormatError, SizeError

logger = logging.getLogger(__name__)

_INT_SCALE = {
    np.dtype(np.int16): 2.0 ** 15,
    np.dtype(np.int32): 2.0 ** 31,
}


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[np.newaxis, :]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise SizeError(f"audio buffer must be (channels, length) with both >= 1, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("audio buffer contains non-finite samples")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def channels(self):
        return self.samples.shape[0]

    @property
    def length(self):
        return self.samples.shape[1]

    def channel(self, m):
        return AudioBuffer(self.samples[m:m + 1], self.sample_rate)


def read_wav(path):
    """Read a RIFF/WAVE file into an :class:`AudioBuffer`.

    PCM16, PCM24, PCM32 and IEEE float32 are accepted. 24-bit data is
    returned by scipy left-justified in int32, so the int32 scale applies.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        rate, data = wavfile.read(path)
    except (ValueError, EOFError) as exc:
        raise AudioFormatError(f"{path}: cannot parse WAV ({exc})") from exc
    if data.dtype in _INT_SCALE:
        x = data.astype(np.float64) / _INT_SCALE[data.dtype]
    elif data.dtype == np.float32:
        x = data.astype(np.float64)
    else:
        raise AudioFormatError(f"{path}: unsupported sample encoding {data.dtype}")
    x = x.reshape(len(x), -1).T
    return AudioBuffer(np.ascontiguousarray(x), rate)


def write_wav(path, buf, encoding="float32"):
    """Write ``buf`` as PCM16 (``"int16"``) or IEEE float32 (``"float32"``).

    Samples outside [-1, 1] are hard-clipped and counted in a warning.
    Returns the number of clipped samples.
    """
    x = buf.samples
    clipped = int(np.count_nonzero(np.abs(x) > 1.0))
    if clipped:
        logger.warning("%s: clipped %d samples to [-1, 1]", path, clipped)
        x = np.clip(x, -1.0, 1.0)
    if encoding == "float32":
        data = x.astype(np.float32)
    elif encoding == "int16":
        data = np.clip(np.round(x * 2.0 ** 15), -2 ** 15, 2 ** 15 - 1).astype(np.int16)
    else:
        raise ValueError(f"unsupported write encoding {encoding!r}")
    wavfile.write(path, buf.sample_rate, np.ascontiguousarray(data.T))
    return clipped
