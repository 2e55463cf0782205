"""Multichannel speech enhancement with the WPD convolutional beamformer.

Also provides WPE dereverberation, MPDR beamforming and their cascade as
baselines, the iterative power/steering estimator they share, a synthetic
scene generator and intrusive quality metrics.
"""
from .audio_io import AudioBuffer, read_wav, write_wav
from .pipeline import PipelineConfig, enhance, estimate_parameters
from .stft import MultichannelSpectrogram, StftConfig, analyze, synthesize

__all__ = [
    "AudioBuffer",
    "MultichannelSpectrogram",
    "PipelineConfig",
    "StftConfig",
    "analyze",
    "enhance",
    "estimate_parameters",
    "read_wav",
    "synthesize",
    "write_wav",
]

__version__ = "0.1.0"
