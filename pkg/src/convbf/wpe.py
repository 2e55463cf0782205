"""Weighted prediction error (WPE) dereverberation.

Per bin, with observations ``x_t`` (M,), the delayed regressor is
``x~_t = [x_{t-b}; ...; x_{t-L}]`` of length ``M K`` with ``K = L - b + 1``
taps. The prediction matrix ``W`` (M K x M) minimizes
``sum_t ||x_t - W^H x~_t||^2 / sigma_t^2`` and the dereverberated signal is
``x_t - W^H x~_t``.
"""
from dataclasses import dataclass

import numpy as np

from .numerics import DEFAULT_LOADING, solve_hermitian


def check_orders(b, lw):
    if b < 1:
        raise ValueError(f"prediction delay must be >= 1, got {b}")
    if lw < b:
        raise ValueError(f"regression order {lw} is smaller than delay {b}")


def n_taps(b, lw):
    return lw - b + 1


@dataclass
class WpeFilter:
    """Prediction matrices, one (M K_f x M) array per bin."""
    taps: list
    b: int
    orders: np.ndarray

    @property
    def bins(self):
        return len(self.taps)

    def tap_block(self, f, tau):
        """The M x M matrix W_tau of bin ``f``."""
        m = self.taps[f].shape[1]
        k = tau - self.b
        return self.taps[f][k * m:(k + 1) * m]


def delayed_stack_matrix(x_f, b, lw):
    """Rows are ``x~_t^T`` for every frame of a (T, M) block -> (T, M K)."""
    check_orders(b, lw)
    t_len, m = x_f.shape
    out = np.zeros((t_len, m * n_taps(b, lw)), dtype=np.complex128)
    for k, tau in enumerate(range(b, lw + 1)):
        if tau < t_len:
            out[tau:, k * m:(k + 1) * m] = x_f[:t_len - tau]
    return out


def build_delayed_stack(spec, t, f, b, lw):
    """The regressor ``[x_{t-b}; ...; x_{t-L}]`` at frame ``t`` of bin ``f``."""
    check_orders(b, lw)
    x_f = spec.bin_view(f)
    blocks = [x_f[t - tau] if t - tau >= 0 else np.zeros(spec.channels, dtype=np.complex128)
              for tau in range(b, lw + 1)]
    return np.concatenate(blocks)


def wpe_filter_bin(x_f, sigma2_f, b, lw, loading=DEFAULT_LOADING):
    """Solve the weighted normal equations for one bin."""
    xt = delayed_stack_matrix(x_f, b, lw)
    xw = xt / sigma2_f[:, None]
    p_mat = xw.T @ xt.conj()
    p_vec = xw.T @ x_f.conj()
    return solve_hermitian(p_mat, p_vec, loading)


def wpe_objective_bin(x_f, sigma2_f, w, b, lw):
    err = x_f - delayed_stack_matrix(x_f, b, lw) @ w.conj()
    return float(np.sum(np.abs(err) ** 2 / sigma2_f[:, None]))


def dereverberate_bin(x_f, w, b, lw):
    return x_f - delayed_stack_matrix(x_f, b, lw) @ w.conj()


def _orders_per_bin(lw, n_bins):
    return np.broadcast_to(np.asarray(lw, dtype=int), (n_bins,)).copy()


def estimate_wpe_filter(spec, sigma2, b, lw, loading=DEFAULT_LOADING):
    """Estimate prediction matrices for every bin.

    ``lw`` is a single order or one order per bin; ``sigma2`` is a
    :class:`PowerEstimate` of shape (T, F).
    """
    orders = _orders_per_bin(lw, spec.bins)
    taps = [wpe_filter_bin(spec.bin_view(f), sigma2.sigma2[:, f], b, int(orders[f]), loading)
            for f in range(spec.bins)]
    return WpeFilter(taps, b, orders)


def apply_wpe(spec, wpe_filter):
    """Subtract the predicted late reverberation from every channel."""
    out = np.empty_like(spec.coeffs)
    for f in range(spec.bins):
        y = dereverberate_bin(spec.bin_view(f), wpe_filter.taps[f], wpe_filter.b,
                              int(wpe_filter.orders[f]))
        out[:, :, f] = y.T
    return spec.with_coeffs(out)


def zero_filter(spec, b, lw):
    orders = _orders_per_bin(lw, spec.bins)
    taps = [np.zeros((spec.channels * n_taps(b, int(o)), spec.channels), dtype=np.complex128)
            for o in orders]
    return WpeFilter(taps, b, orders)
