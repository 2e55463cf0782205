"""MPDR, WPD and cascade-composition beamformers.

The WPD filter ``w = [w_0; w_b; ...; w_L]`` acts on the stacked observation
``x_t = [x_t; x_{t-b}; ...; x_{t-L}]`` of length ``D = M (L - b + 2)`` and is

    w = R^-1 v / (v^H R^-1 v),   R = sum_t x_t x_t^H / sigma_t^2,

where ``v = [v; 0 ... 0]`` extends the RTF with ``M (L - b + 1)`` zeros.
The final stacked block is ``x_{t-L}`` so that it pairs with ``w_L``.
"""
from dataclasses import dataclass

import numpy as np

from .numerics import DEFAULT_LOADING, solve_hermitian
from .wpe import check_orders, delayed_stack_matrix, n_taps


@dataclass
class ConvolutionalFilter:
    """One stacked filter of length ``M (L_f - b + 2)`` per bin."""
    weights: list
    b: int
    orders: np.ndarray
    channels: int

    @property
    def bins(self):
        return len(self.weights)

    def instantaneous(self, f):
        return self.weights[f][:self.channels]


def stack_dim(m, b, lw):
    return m * (n_taps(b, lw) + 1)


def extended_steering(v, b, lw):
    """``[v; 0 ... 0]`` with ``M (L - b + 1)`` trailing zeros."""
    v = np.asarray(v, dtype=np.complex128)
    out = np.zeros(stack_dim(v.size, b, lw), dtype=np.complex128)
    out[:v.size] = v
    return out


def wpd_stack_matrix(x_f, b, lw):
    """Rows are the stacked observations for each frame of a (T, M) block."""
    return np.hstack([x_f, delayed_stack_matrix(x_f, b, lw)])


def build_wpd_stack(spec, t, f, b, lw):
    check_orders(b, lw)
    x_f = spec.bin_view(f)
    blocks = [x_f[t]]
    for tau in range(b, lw + 1):
        blocks.append(x_f[t - tau] if t - tau >= 0
                      else np.zeros(spec.channels, dtype=np.complex128))
    return np.concatenate(blocks)


def weighted_covariance(stack, sigma2_f=None):
    """``sum_t s_t s_t^H / sigma_t^2`` for a (T, D) block of stacked rows."""
    sw = stack if sigma2_f is None else stack / sigma2_f[:, None]
    r = sw.T @ stack.conj()
    return 0.5 * (r + r.conj().T)


def distortionless_solve(r, v_ext, loading=DEFAULT_LOADING):
    """``R^-1 v / (v^H R^-1 v)``; satisfies ``w^H v = 1`` to rounding."""
    y = solve_hermitian(r, v_ext, loading)
    return y / np.vdot(v_ext, y)


def weighted_output_power(stack, w, sigma2_f=None):
    out = np.abs(stack @ w.conj()) ** 2
    if sigma2_f is not None:
        out = out / sigma2_f
    return float(out.sum())


def _orders(lw, n_bins):
    return np.broadcast_to(np.asarray(lw, dtype=int), (n_bins,)).copy()


def estimate_mpdr(spec, steering, weights=None, loading=DEFAULT_LOADING):
    """Instantaneous MPDR filters, shape (F, M).

    Unweighted covariance by default; pass a :class:`PowerEstimate` as
    ``weights`` for the power-normalized variant.
    """
    w0 = np.empty((spec.bins, spec.channels), dtype=np.complex128)
    for f in range(spec.bins):
        s2 = None if weights is None else weights.sigma2[:, f]
        r = weighted_covariance(spec.bin_view(f), s2)
        w0[f] = distortionless_solve(r, steering.v[f], loading)
    return w0


def apply_instantaneous(spec, w0):
    """``w_0^H x_t`` for every frame and bin -> (T, F)."""
    return np.einsum("fm,mtf->tf", w0.conj(), spec.coeffs)


def assemble_R(spec, sigma2, b, lw):
    """Power-normalized spatio-temporal covariance of each bin."""
    orders = _orders(lw, spec.bins)
    return [weighted_covariance(wpd_stack_matrix(spec.bin_view(f), b, int(orders[f])),
                                sigma2.sigma2[:, f])
            for f in range(spec.bins)]


def solve_wpd(r_list, steering, b, lw, loading=DEFAULT_LOADING):
    """Closed-form WPD filter for each bin from its covariance ``R``."""
    n_bins = len(r_list)
    orders = _orders(lw, n_bins)
    weights = [distortionless_solve(r_list[f], extended_steering(steering.v[f], b, int(orders[f])),
                                    loading)
               for f in range(n_bins)]
    return ConvolutionalFilter(weights, b, orders, steering.channels)


def apply_wpd(spec, conv_filter):
    """``w^H x_t`` with the stacked observation -> (T, F)."""
    out = np.empty((spec.frames, spec.bins), dtype=np.complex128)
    for f in range(spec.bins):
        stack = wpd_stack_matrix(spec.bin_view(f), conv_filter.b, int(conv_filter.orders[f]))
        out[:, f] = stack @ conv_filter.weights[f].conj()
    return out


def compose_cascade(wpe_filter, w0):
    """Fold WPE followed by an instantaneous beamformer into one stacked filter.

    Each tap becomes ``w_tau = -W_tau w_0``, so that
    ``w^H x_t = w_0^H (x_t - sum_tau W_tau^H x_{t-tau})``.
    """
    weights = [np.concatenate([w0[f], -(wpe_filter.taps[f] @ w0[f])])
               for f in range(wpe_filter.bins)]
    return ConvolutionalFilter(weights, wpe_filter.b, wpe_filter.orders.copy(), w0.shape[1])


def compose_reverse(w0, denoise, coeffs, b):
    """Filter of the reverse-order cascade for one bin.

    ``denoise`` is an M x M' matrix whose first column is ``w0``;
    ``coeffs`` is a (K, M') array of predictors ``c_tau`` applied to the
    denoised past. Taps are ``w_tau = -denoise @ c_tau``.
    """
    taps = [-(denoise @ c) for c in coeffs]
    return np.concatenate([w0] + taps)


def selector_filter(channels, q, b, lw):
    w = np.zeros(stack_dim(channels, b, lw), dtype=np.complex128)
    w[q] = 1.0
    return w
