"""End-to-end enhancement: band schedule, parameter estimation and filtering.

All four methods are expressed as stacked convolutional filters so that they
can be compared on one footing:

* ``wpe``     - channel ``q`` of the WPE output, i.e. the cascade with ``w_0 = e_q``
* ``mpdr``    - unweighted MPDR with zero convolutional taps
* ``cascade`` - WPE followed by unweighted MPDR, folded into one filter
* ``wpd``     - the jointly optimal weighted-power distortionless filter

Every method consumes the same (sigma^2, v) snapshot from
:func:`estimate_parameters`.
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import estimation, wpe
from .audio_io import AudioBuffer
from .beamform import (ConvolutionalFilter, apply_wpd, distortionless_solve, extended_steering,
                       selector_filter, stack_dim, weighted_covariance, wpd_stack_matrix)
from .errors import NumericalError
from .estimation import PowerEstimate, SteeringVector
from .numerics import DEFAULT_LOADING
from .stft import MultichannelSpectrogram, StftConfig, analyze, synthesize

logger = logging.getLogger(__name__)

METHODS = ("wpe", "mpdr", "cascade", "wpd")
MAX_FAILED_FRACTION = 0.05

# upper band edges (Hz at 16 kHz) and regression orders; the fifth band repeats 6
DEFAULT_BANDS = ((0.0, 800.0, 12), (800.0, 1500.0, 10), (1500.0, 3000.0, 8),
               (3000.0, 6000.0, 6), (6000.0, 8000.0, 6))
DEFAULT_DELAY = 4
DEFAULT_ITERATIONS = 2


@dataclass(frozen=True)
class BandSchedule:
    bands: tuple
    delay: int = DEFAULT_DELAY

    def __post_init__(self):
        bands = tuple((float(lo), float(hi), int(order)) for lo, hi, order in self.bands)
        if not bands:
            raise ValueError("band schedule is empty")
        if bands[0][0] != 0.0:
            raise ValueError("first band must start at 0 Hz")
        for (_, hi, _), (lo, _, _) in zip(bands, bands[1:]):
            if hi != lo:
                raise ValueError("bands must be contiguous")
        for lo, hi, order in bands:
            if hi <= lo:
                raise ValueError(f"empty band [{lo}, {hi})")
            if order < self.delay:
                raise ValueError(f"regression order {order} < prediction delay {self.delay}")
        if self.delay < 1:
            raise ValueError("prediction delay must be >= 1")
        object.__setattr__(self, "bands", bands)

    @property
    def max_order(self):
        return max(order for _, _, order in self.bands)

    def order_at(self, freq):
        if freq < 0:
            raise ValueError(f"negative frequency {freq}")
        for lo, hi, order in self.bands:
            if lo <= freq < hi:
                return order
        # the top band is closed at Nyquist
        return self.bands[-1][2]

    def orders_for(self, cfg):
        """Regression order of each STFT bin (band chosen by bin centre)."""
        return np.array([self.order_at(f) for f in cfg.bin_frequencies()], dtype=int)

    def to_string(self):
        return ",".join(f"{hi:g}:{order}" for _, hi, order in self.bands)


def default_schedule(sample_rate=16000):
    scale = sample_rate / 16000.0
    return BandSchedule(tuple((lo * scale, hi * scale, order) for lo, hi, order in DEFAULT_BANDS),
                        DEFAULT_DELAY)


def parse_schedule(text, delay=DEFAULT_DELAY, sample_rate=16000):
    """Parse ``"800:12,1500:10,..."`` (upper edge in Hz : order) into a schedule.

    The last band is stretched to the Nyquist frequency.
    """
    bands = []
    lo = 0.0
    items = [item for item in text.replace(" ", "").split(",") if item]
    if not items:
        raise ValueError("empty schedule")
    for i, item in enumerate(items):
        try:
            hi_s, order_s = item.split(":")
            hi, order = float(hi_s), int(order_s)
        except ValueError:
            raise ValueError(f"bad schedule entry {item!r}; expected EDGE_HZ:ORDER") from None
        if i == len(items) - 1:
            hi = max(hi, sample_rate / 2.0)
        bands.append((lo, hi, order))
        lo = hi
    return BandSchedule(tuple(bands), delay)


@dataclass(frozen=True)
class PipelineConfig:
    method: str = "wpd"
    iterations: int = DEFAULT_ITERATIONS
    stft: StftConfig = field(default_factory=StftConfig)
    schedule: BandSchedule = None
    q: int = 0
    head_ms: float = 225.0
    tail_ms: float = 75.0
    loading: float = DEFAULT_LOADING
    floor_eps: float = estimation.FLOOR_EPS

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.loading < 0:
            raise ValueError("loading must be >= 0")
        if self.q < 0:
            raise ValueError("reference channel must be >= 0")
        if self.schedule is None:
            object.__setattr__(self, "schedule", default_schedule(self.stft.sample_rate))

    @property
    def delay(self):
        return self.schedule.delay

    def describe(self):
        return {
            "method": self.method,
            "iterations": self.iterations,
            "frame_len": self.stft.frame_len,
            "hop": self.stft.hop,
            "sample_rate": self.stft.sample_rate,
            "delay": self.delay,
            "schedule": self.schedule.to_string(),
            "ref_channel": self.q,
            "head_ms": self.head_ms,
            "tail_ms": self.tail_ms,
            "loading": self.loading,
        }


@dataclass
class ParameterSnapshot:
    """Power and steering estimates shared by every method.

    Unpacks as ``sigma2, steering = snapshot``.
    """
    sigma2: PowerEstimate
    steering: SteeringVector
    failed: dict = field(default_factory=dict)
    silent: np.ndarray = None

    def __iter__(self):
        return iter((self.sigma2, self.steering))


def _selector_rtf(m, q):
    v = np.zeros(m, dtype=np.complex128)
    v[q] = 1.0
    return v


def _estimate_bin(x_f, b, lw, cfg, head_tail):
    s2 = estimation.floor_power(np.mean(np.abs(x_f) ** 2, axis=1)[:, None], cfg.floor_eps)[:, 0]
    if cfg.iterations == 0:
        phi_n = estimation.spatial_covariance(x_f[head_tail])
        v, low = estimation.steering_bin(x_f, phi_n, cfg.q, cfg.loading)
        return s2, v, low
    for it in range(cfg.iterations):
        try:
            w = wpe.wpe_filter_bin(x_f, s2, b, lw, cfg.loading)
            derev = wpe.dereverberate_bin(x_f, w, b, lw)
            phi_n = estimation.spatial_covariance(derev[head_tail])
            v, low = estimation.steering_bin(derev, phi_n, cfg.q, cfg.loading)
            w0 = distortionless_solve(weighted_covariance(derev), v, cfg.loading)
            d_hat = derev @ w0.conj()
            s2 = estimation.floor_power(np.abs(d_hat)[:, None] ** 2, cfg.floor_eps)[:, 0]
        except NumericalError as exc:
            raise type(exc)(f"iteration {it + 1}: {exc}") from exc
    return s2, v, low


def _check_channels(spec, cfg):
    if cfg.q >= spec.channels:
        raise ValueError(f"reference channel {cfg.q} out of range for {spec.channels} channels")


def _silent_bins(spec):
    return ~np.any(spec.coeffs != 0, axis=(0, 1))


def estimate_parameters(spec, cfg):
    """Alternate WPE and MPDR to estimate sigma^2 and the RTF.

    Starting from the observed channel-mean power, each iteration
    dereverberates with WPE, re-estimates the RTF on the WPE output with the
    edge-frame noise covariance, beamforms with MPDR and takes the output
    power as the new sigma^2. Bins that fail numerically fall back to the
    initial power and a reference-channel selector and are listed in
    ``snapshot.failed``.
    """
    _check_channels(spec, cfg)
    head_idx, tail_idx = estimation.edge_frames(spec, cfg.head_ms, cfg.tail_ms)
    head_tail = np.union1d(head_idx, tail_idx)
    orders = cfg.schedule.orders_for(spec.config)
    b = cfg.delay
    m = spec.channels
    sigma2 = np.empty((spec.frames, spec.bins))
    v = np.empty((spec.bins, m), dtype=np.complex128)
    low = np.zeros(spec.bins, dtype=bool)
    silent = _silent_bins(spec)
    failed = {}
    for f in range(spec.bins):
        x_f = spec.bin_view(f)
        if silent[f]:
            sigma2[:, f] = estimation.ABS_FLOOR
            v[f] = _selector_rtf(m, cfg.q)
            low[f] = True
            continue
        try:
            sigma2[:, f], v[f], low[f] = _estimate_bin(x_f, b, int(orders[f]), cfg, head_tail)
        except NumericalError as exc:
            failed[f] = str(exc)
            logger.warning("bin %d: parameter estimation failed: %s", f, exc)
            sigma2[:, f] = estimation.floor_power(
                np.mean(np.abs(x_f) ** 2, axis=1)[:, None], cfg.floor_eps)[:, 0]
            v[f] = _selector_rtf(m, cfg.q)
            low[f] = True
    return ParameterSnapshot(PowerEstimate(sigma2, cfg.floor_eps),
                             SteeringVector(v, cfg.q, low), failed, silent)


def _design_bin(x_f, s2, v, b, lw, method, q, loading):
    """Return ``(stacked filter, matrix that was inverted or None)``."""
    m = x_f.shape[1]
    if method == "wpd":
        r = weighted_covariance(wpd_stack_matrix(x_f, b, lw), s2)
        return distortionless_solve(r, extended_steering(v, b, lw), loading), r
    if method == "mpdr":
        r = weighted_covariance(x_f)
        w = np.zeros(stack_dim(m, b, lw), dtype=np.complex128)
        w[:m] = distortionless_solve(r, v, loading)
        return w, r
    taps = wpe.wpe_filter_bin(x_f, s2, b, lw, loading)
    if method == "wpe":
        w0 = _selector_rtf(m, q)
        r = None
    else:
        derev = wpe.dereverberate_bin(x_f, taps, b, lw)
        r = weighted_covariance(derev)
        w0 = distortionless_solve(r, v, loading)
    return np.concatenate([w0, -(taps @ w0)]), r


@dataclass
class Diagnostics:
    method: str
    weighted_power: np.ndarray
    constraint_residual: np.ndarray
    condition: np.ndarray
    failed: dict
    band_edges: tuple
    orders: np.ndarray
    runtime_s: float = 0.0
    config: dict = field(default_factory=dict)
    band_freqs: np.ndarray = None

    @property
    def total_weighted_power(self):
        return float(np.sum(self.weighted_power))

    def band_condition(self):
        """Largest condition estimate per band -> list of (lo, hi, order, cond)."""
        out = []
        freqs = self.band_freqs
        last = len(self.band_edges) - 1
        for i, (lo, hi, order) in enumerate(self.band_edges):
            sel = (freqs >= lo) & ((freqs < hi) | ((i == last) & (freqs <= hi)))
            vals = self.condition[sel]
            vals = vals[np.isfinite(vals)]
            out.append((lo, hi, order, float(vals.max()) if vals.size else float("nan")))
        return out

    def to_text(self):
        lines = [f"{k}={v}" for k, v in self.config.items()]
        lines.append(f"method={self.method}")
        lines.append(f"total_weighted_power={self.total_weighted_power:.9g}")
        lines.append(f"max_constraint_residual={np.max(self.constraint_residual):.3e}")
        for lo, hi, order, cond in self.band_condition():
            lines.append(f"band_{lo:g}_{hi:g}_order{order}_max_condition={cond:.3e}")
        lines.append(f"failed_bins={','.join(str(f) for f in sorted(self.failed)) or 'none'}")
        lines.append(f"runtime_s={self.runtime_s:.3f}")
        return "\n".join(lines)


def design_filters(spec, snapshot, cfg, method=None):
    """Per-bin stacked filters of ``method`` from a fixed parameter snapshot.

    Returns ``(ConvolutionalFilter, Diagnostics)``. Silent or failed bins
    get the reference-channel selector. Raises :class:`NumericalError` when
    more than 5% of the bins fail.
    """
    method = method or cfg.method
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    _check_channels(spec, cfg)
    if method != "wpe" and spec.channels < 2:
        logger.warning("%s with a single channel reduces to (near) identity", method)
    start = time.perf_counter()
    b = cfg.delay
    orders = cfg.schedule.orders_for(spec.config)
    sigma2 = snapshot.sigma2.sigma2
    v_all = snapshot.steering.v
    silent = snapshot.silent if snapshot.silent is not None else _silent_bins(spec)
    failed = dict(snapshot.failed)
    weights = []
    power = np.zeros(spec.bins)
    resid = np.zeros(spec.bins)
    cond = np.full(spec.bins, np.nan)
    for f in range(spec.bins):
        lw = int(orders[f])
        x_f = spec.bin_view(f)
        w = None
        if not silent[f] and f not in failed:
            try:
                w, r = _design_bin(x_f, sigma2[:, f], v_all[f], b, lw, method, cfg.q, cfg.loading)
                if r is not None:
                    eig = np.linalg.eigvalsh(r)
                    cond[f] = eig[-1] / eig[0] if eig[0] > 0 else np.inf
            except NumericalError as exc:
                failed[f] = str(exc)
                logger.warning("bin %d: %s filter failed: %s", f, method, exc)
        if w is None:
            w = selector_filter(spec.channels, cfg.q, b, lw)
        weights.append(w)
        stack = wpd_stack_matrix(x_f, b, lw)
        power[f] = np.sum(np.abs(stack @ w.conj()) ** 2 / sigma2[:, f])
        resid[f] = abs(np.vdot(w[:spec.channels], v_all[f]) - 1.0)
    if len(failed) > MAX_FAILED_FRACTION * spec.bins:
        raise NumericalError(f"{len(failed)} of {spec.bins} bins failed "
                             f"(limit {MAX_FAILED_FRACTION:.0%}); first: "
                             f"{failed[min(failed)]}")
    diag = Diagnostics(method, power, resid, cond, failed, cfg.schedule.bands, orders,
                       time.perf_counter() - start, cfg.describe(),
                       band_freqs=spec.config.bin_frequencies())
    return ConvolutionalFilter(weights, b, orders, spec.channels), diag


def weighted_power_per_bin(spec, conv_filter, sigma2):
    out = np.empty(spec.bins)
    for f in range(spec.bins):
        stack = wpd_stack_matrix(spec.bin_view(f), conv_filter.b, int(conv_filter.orders[f]))
        out[f] = np.sum(np.abs(stack @ conv_filter.weights[f].conj()) ** 2 / sigma2.sigma2[:, f])
    return out


def output_spectrogram(spec, d_hat):
    """Wrap a (T, F) single-channel estimate as a 1-channel spectrogram."""
    return MultichannelSpectrogram(d_hat[np.newaxis], spec.config, spec.length)


def enhance_spectrogram(spec, cfg, snapshot=None):
    """Run estimation (unless ``snapshot`` is given) and filtering in the STFT domain.

    Returns ``(d_hat (T, F), filter, snapshot, diagnostics)``.
    """
    start = time.perf_counter()
    if snapshot is None:
        snapshot = estimate_parameters(spec, cfg)
    conv_filter, diag = design_filters(spec, snapshot, cfg)
    d_hat = apply_wpd(spec, conv_filter)
    diag.runtime_s = time.perf_counter() - start
    return d_hat, conv_filter, snapshot, diag


def enhance(buf, cfg):
    """Enhance a multichannel recording -> (1-channel AudioBuffer, Diagnostics)."""
    if buf.sample_rate != cfg.stft.sample_rate:
        raise ValueError(f"input rate {buf.sample_rate} Hz does not match the "
                         f"configured {cfg.stft.sample_rate} Hz")
    spec = analyze(buf, cfg.stft)
    d_hat, _, _, diag = enhance_spectrogram(spec, cfg)
    out = synthesize(output_spectrogram(spec, d_hat))
    return AudioBuffer(out.samples, buf.sample_rate), diag
