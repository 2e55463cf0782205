import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convbf.beamform import (ConvolutionalFilter, apply_instantaneous, apply_wpd, assemble_R,
                             build_wpd_stack, compose_cascade, compose_reverse,
                             distortionless_solve, estimate_mpdr, extended_steering,
                             selector_filter, solve_wpd, stack_dim, weighted_covariance,
                             weighted_output_power, wpd_stack_matrix)
from convbf.estimation import PowerEstimate, SteeringVector
from convbf.wpe import apply_wpe, estimate_wpe_filter

from conftest import crandn, random_hpd, random_spec


def kkt_solve(r, v):
    """Minimize w^H R w subject to w^H v = 1 via the bordered Lagrangian system."""
    d = v.size
    kkt = np.zeros((d + 1, d + 1), dtype=complex)
    kkt[:d, :d] = r
    kkt[:d, d] = v
    kkt[d, :d] = v.conj()
    rhs = np.zeros(d + 1, dtype=complex)
    rhs[d] = 1.0
    return np.linalg.solve(kkt, rhs)[:d]


def _setup(rng, m=2, frames=40, b=1, lw=3):
    spec = random_spec(rng, channels=m, frames=frames)
    sigma2 = PowerEstimate(rng.uniform(0.3, 2.0, (spec.frames, spec.bins)))
    v = crandn(rng, spec.bins, m)
    v /= v[:, :1]
    return spec, sigma2, SteeringVector(v)


def test_stack_layout_ends_with_lag_l(rng):
    spec = random_spec(rng, channels=2, frames=10)
    b, lw, f = 2, 4, 1
    assert stack_dim(2, b, lw) == 2 * (lw - b + 2)
    x = spec.bin_view(f)
    s = build_wpd_stack(spec, 6, f, b, lw)
    np.testing.assert_array_equal(s, np.concatenate([x[6], x[4], x[3], x[2]]))
    np.testing.assert_array_equal(wpd_stack_matrix(x, b, lw)[6], s)
    v = extended_steering(np.array([1.0, 2.0]), b, lw)
    np.testing.assert_array_equal(v, [1, 2, 0, 0, 0, 0, 0, 0])


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 8), seed=st.integers(0, 2 ** 31))
def test_distortionless_solve_matches_kkt(d, seed):
    rng = np.random.default_rng(seed)
    r = random_hpd(rng, d, 100.0)
    v = crandn(rng, d)
    w = distortionless_solve(r, v, loading=0.0)
    assert abs(np.vdot(w, v) - 1) < 1e-12
    ref = kkt_solve(r, v)
    assert np.linalg.norm(w - ref) <= 1e-8 * np.linalg.norm(ref)


def test_weighted_covariance_loop_oracle(rng):
    s = crandn(rng, 20, 3)
    sig = rng.uniform(0.5, 2, 20)
    ref = sum(np.outer(s[t], s[t].conj()) / sig[t] for t in range(20))
    np.testing.assert_allclose(weighted_covariance(s, sig), ref, atol=1e-12)
    w = crandn(rng, 3)
    assert weighted_output_power(s, w, sig) == pytest.approx(np.real(w.conj() @ ref @ w))


def test_wpd_constraint_and_optimality(rng):
    spec, sigma2, sv = _setup(rng)
    r = assemble_R(spec, sigma2, 1, 3)
    filt = solve_wpd(r, sv, 1, 3)
    for f in range(spec.bins):
        w = filt.weights[f]
        assert abs(np.vdot(w, extended_steering(sv.v[f], 1, 3)) - 1) < 1e-10
        ref = kkt_solve(r[f], extended_steering(sv.v[f], 1, 3))
        obj = np.real(w.conj() @ r[f] @ w)
        assert obj == pytest.approx(np.real(ref.conj() @ r[f] @ ref), rel=1e-8)


def test_mpdr_weighted_and_unweighted(rng):
    spec, sigma2, sv = _setup(rng, m=3)
    w0 = estimate_mpdr(spec, sv, loading=0.0)
    w0w = estimate_mpdr(spec, sv, sigma2, loading=0.0)
    for f in (0, 4):
        x = spec.bin_view(f)
        np.testing.assert_allclose(w0[f], kkt_solve(weighted_covariance(x), sv.v[f]), atol=1e-10)
        np.testing.assert_allclose(w0w[f], kkt_solve(weighted_covariance(x, sigma2.sigma2[:, f]),
                                                     sv.v[f]), atol=1e-10)
    y = apply_instantaneous(spec, w0)
    np.testing.assert_allclose(y[:, 2], spec.bin_view(2) @ w0[2].conj())


def test_zero_taps_reduce_to_instantaneous(rng):
    spec, sigma2, sv = _setup(rng)
    w0 = estimate_mpdr(spec, sv, sigma2)
    filt = ConvolutionalFilter([np.concatenate([w0[f], np.zeros(4)]) for f in range(spec.bins)],
                               2, np.full(spec.bins, 3), 2)
    np.testing.assert_allclose(apply_wpd(spec, filt), apply_instantaneous(spec, w0), atol=1e-12)


def test_cascade_composition_equals_sequential(rng):
    spec, sigma2, sv = _setup(rng, m=3)
    wf = estimate_wpe_filter(spec, sigma2, 1, 3)
    w0 = estimate_mpdr(spec, sv)
    composed = apply_wpd(spec, compose_cascade(wf, w0))
    sequential = apply_instantaneous(apply_wpe(spec, wf), w0)
    np.testing.assert_allclose(composed, sequential, atol=1e-12)


def test_reverse_composition_structure(rng):
    m, b, k = 3, 1, 2
    x = crandn(rng, 30, m)
    w0 = crandn(rng, m)
    denoise = np.column_stack([w0, crandn(rng, m)])
    coeffs = crandn(rng, k, 2)
    w = compose_reverse(w0, denoise, coeffs, b)
    # y_t = z0_t - sum_tau c_tau^H z_{t-tau} with z_t = denoise^H x_t
    z = x @ denoise.conj()
    y_ref = z[:, 0].copy()
    for j, tau in enumerate(range(b, b + k)):
        y_ref[tau:] -= z[:-tau] @ coeffs[j].conj()
    np.testing.assert_allclose(wpd_stack_matrix(x, b, b + k - 1) @ w.conj(), y_ref, atol=1e-12)


def test_selector_filter(rng):
    w = selector_filter(3, 1, 1, 2)
    assert w.shape == (9,) and w[1] == 1 and np.count_nonzero(w) == 1
