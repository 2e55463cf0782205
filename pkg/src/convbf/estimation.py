"""Desired-signal power and steering-vector estimation."""
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateReferenceError, EstimationError
from .numerics import DEFAULT_LOADING, whitened_gevd

logger = logging.getLogger(__name__)

FLOOR_EPS = 1e-6
# absolute floor so an all-zero bin still yields positive weights
ABS_FLOOR = 1e-12
# noise covariance is replaced by a scaled identity below this fraction of tr(Phi_x)
NOISE_TRACE_RTOL = 1e-12
DEGENERATE_REF_RTOL = 1e-12


@dataclass
class PowerEstimate:
    sigma2: np.ndarray
    floor_eps: float = FLOOR_EPS

    @property
    def frames(self):
        return self.sigma2.shape[0]

    @property
    def bins(self):
        return self.sigma2.shape[1]

    def scaled(self, c):
        return PowerEstimate(self.sigma2 * c, self.floor_eps)


@dataclass
class SteeringVector:
    v: np.ndarray
    reference: int = 0
    low_confidence: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.low_confidence is None:
            self.low_confidence = np.zeros(self.v.shape[0], dtype=bool)

    @property
    def bins(self):
        return self.v.shape[0]

    @property
    def channels(self):
        return self.v.shape[1]


def floor_power(sigma2, floor_eps=FLOOR_EPS):
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    floor = np.maximum(floor_eps * sigma2.mean(axis=0, keepdims=True), ABS_FLOOR)
    return np.maximum(sigma2, floor)


def initial_power(spec, floor_eps=FLOOR_EPS):
    """Channel-averaged power of the observation, shape (T, F)."""
    p = np.mean(np.abs(spec.coeffs) ** 2, axis=0)
    return PowerEstimate(floor_power(p, floor_eps), floor_eps)


def update_power_from_estimate(d_hat, floor_eps=FLOOR_EPS):
    """|d_hat|^2 of a single-channel (T, F) enhanced signal, floored."""
    return PowerEstimate(floor_power(np.abs(d_hat) ** 2, floor_eps), floor_eps)


def edge_frames(spec, head_ms=225.0, tail_ms=75.0):
    """Indices of frames lying entirely inside the leading/trailing noise-only spans."""
    cfg = spec.config
    starts = cfg.hop * np.arange(spec.frames)
    stops = starts + cfg.frame_len
    head = int(np.floor(head_ms * cfg.sample_rate / 1000 + 1e-9))
    tail_start = spec.length - int(np.floor(tail_ms * cfg.sample_rate / 1000 + 1e-9))
    head_idx = np.flatnonzero(stops <= head)
    tail_idx = np.flatnonzero((starts >= tail_start) & (stops <= spec.length))
    if head_idx.size == 0:
        raise EstimationError(f"no frame fits in the leading noise-only interval [0, {head_ms} ms]")
    if tail_idx.size == 0:
        raise EstimationError(f"no frame fits in the trailing noise-only interval (last {tail_ms} ms)")
    return head_idx, tail_idx


def spatial_covariance(x_f):
    """Mean outer product of the rows of a (T, M) observation block."""
    return x_f.T @ x_f.conj() / x_f.shape[0]


def noise_covariance_from_edges(spec, head_ms=225.0, tail_ms=75.0):
    """Per-bin noise covariance, shape (F, M, M), from the edge frames."""
    head_idx, tail_idx = edge_frames(spec, head_ms, tail_ms)
    idx = np.union1d(head_idx, tail_idx)
    x = spec.coeffs[:, idx, :]
    return np.einsum("atf,btf->fab", x, x.conj()) / idx.size


def steering_bin(x_f, phi_n, q=0, loading=DEFAULT_LOADING):
    """RTF estimate for one bin from a (T, M) block and its noise covariance.

    Returns ``(v, low_confidence)`` with ``v[q] == 1``.
    """
    phi_x = spatial_covariance(x_f)
    m = phi_x.shape[0]
    tr_x = float(np.real(np.trace(phi_x)))
    tr_n = float(np.real(np.trace(phi_n)))
    if tr_n <= NOISE_TRACE_RTOL * tr_x:
        # noiseless bin: whitening degenerates to plain PCA
        phi_n = (1e-6 * tr_x / m) * np.eye(m)
    v, lam, flat, chol = whitened_gevd(phi_x, phi_n, loading, return_details=True)
    if flat:
        # every direction is principal; pick the one with maximal reference weight
        e_q = np.zeros(m)
        e_q[q] = 1.0
        v = chol @ (chol.conj().T @ e_q)
    if abs(v[q]) < DEGENERATE_REF_RTOL * np.linalg.norm(v):
        raise DegenerateReferenceError(f"steering vector vanishes at reference channel {q}")
    v = v / v[q]
    v[q] = 1.0
    return v, bool(flat)


def estimate_steering(spec, phi_n, q=0, loading=DEFAULT_LOADING):
    """Per-bin RTF via covariance-whitened GEVD over all frames."""
    f_bins = spec.bins
    v = np.empty((f_bins, spec.channels), dtype=np.complex128)
    low = np.zeros(f_bins, dtype=bool)
    for f in range(f_bins):
        v[f], low[f] = steering_bin(spec.bin_view(f), phi_n[f], q, loading)
    if low.any():
        logger.debug("%d bins have a flat whitened spectrum", int(low.sum()))
    return SteeringVector(v, q, low)
