"""Complex Hermitian linear algebra used by the estimators and beamformers.

Matrices are plain complex ndarrays. Every routine symmetrizes its input
first, so results do not depend on rounding noise in the upper triangle.
"""
import numpy as np
from scipy import linalg

from .errors import ConvergenceError, SingularMatrixError

DEFAULT_LOADING = 1e-8
POWER_TOL = 1e-10
POWER_MAX_ITER = 500


def hermitian_part(a, check=True, rtol=1e-12):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if check:
        scale = max(np.abs(a).max(), np.finfo(float).tiny)
        asym = np.abs(a - a.conj().T).max()
        if asym > rtol * scale:
            raise ValueError(f"matrix is not Hermitian (asymmetry {asym / scale:.2e})")
    return 0.5 * (a + a.conj().T)


def load_diagonal(a, loading):
    """Return ``a + loading * mean(diag(a)) * I``."""
    d = a.shape[0]
    mu = np.real(np.trace(a)) / d
    return a + (loading * mu) * np.eye(d)


def condition_estimate(a):
    """2-norm condition number via eigenvalues of a Hermitian matrix."""
    w = np.linalg.eigvalsh(a)
    if w[0] <= 0:
        return float("inf")
    return float(w[-1] / w[0])


def cholesky(a, loading=DEFAULT_LOADING):
    """Lower Cholesky factor of the diagonally loaded Hermitian matrix."""
    a = load_diagonal(hermitian_part(a), loading)
    try:
        return linalg.cholesky(a, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise SingularMatrixError("Cholesky factorization failed",
                                  condition_estimate(a)) from None


def solve_hermitian(a, b, loading=DEFAULT_LOADING):
    """Solve ``(A + loading * tr(A)/D * I) y = b`` through a Cholesky factor.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    a = load_diagonal(hermitian_part(a), loading)
    b = np.asarray(b, dtype=np.complex128)
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"dimension mismatch: A is {a.shape}, b is {b.shape}")
    try:
        factor = linalg.cho_factor(a, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise SingularMatrixError("Hermitian solve failed",
                                  condition_estimate(a)) from None
    return linalg.cho_solve(factor, b, check_finite=False)


def _fix_phase(u):
    k = int(np.argmax(np.abs(u)))
    return u * (np.abs(u[k]) / u[k])


def principal_eigenvector(a, tol=POWER_TOL, max_iter=POWER_MAX_ITER):
    """Dominant eigenpair of a Hermitian PSD matrix.

    Power iteration on a repeatedly squared (and renormalized) copy of ``a``
    so that small eigengaps still converge within the iteration cap. Each
    step reads the iterate off the largest column of the current power and
    stops once the Rayleigh quotient has settled to ``tol`` and the residual
    ``||A u - lambda u||`` is below ``tol * lambda``; if only the looser
    ``1e-8 * lambda`` residual is reached before the cap, that is accepted.

    Returns ``(u, lam)`` with ``||u|| = 1`` and the largest-magnitude entry of
    ``u`` real-positive.
    """
    a = hermitian_part(a)
    d = a.shape[0]
    scale = np.abs(a).max()
    if scale == 0:
        u = np.zeros(d, dtype=np.complex128)
        u[0] = 1.0
        return u, 0.0
    a = a / scale
    power = a.copy()
    lam_prev = np.inf
    best = None
    for it in range(1, max_iter + 1):
        col = int(np.argmax(np.linalg.norm(power, axis=0)))
        u = a @ power[:, col]
        norm = np.linalg.norm(u)
        if norm == 0:
            u = power[:, col]
            norm = np.linalg.norm(u)
        u = u / norm
        au = a @ u
        lam = float(np.real(np.vdot(u, au)))
        resid = np.linalg.norm(au - lam * u)
        if best is None or resid < best[2]:
            best = (u, lam, resid)
        if abs(lam - lam_prev) <= tol * abs(lam) and resid <= tol * abs(lam):
            break
        lam_prev = lam
        power = power @ power
        power = 0.5 * (power + power.conj().T)
        pn = np.abs(power).max()
        if pn == 0 or not np.isfinite(pn):
            break
        power /= pn
    u, lam, resid = best
    if resid > 1e-8 * abs(lam):
        raise ConvergenceError("principal eigenvector did not converge", it)
    return _fix_phase(u), lam * scale


def whitened_gevd(phi_x, phi_n, loading=DEFAULT_LOADING, return_details=False):
    """Covariance-whitening estimate of the dominant generalized direction.

    With ``phi_n = L L^H`` the whitened matrix ``L^-1 phi_x L^-H`` has
    principal eigenvector ``u``; the returned vector is ``v = L u``. It is
    related to the principal generalized eigenvector ``y`` of
    ``(phi_x, phi_n)`` by ``v = phi_n y``, i.e. ``phi_x phi_n^-1 v = lam v``.

    With ``return_details=True`` returns ``(v, lam, flat, chol)``: ``flat``
    means the whitened spectrum is numerically white (every direction is
    principal) and ``chol`` is the noise Cholesky factor.
    """
    phi_x = hermitian_part(phi_x)
    chol = cholesky(phi_n, loading)
    tmp = linalg.solve_triangular(chol, phi_x, lower=True, check_finite=False)
    white = linalg.solve_triangular(chol, tmp.conj().T, lower=True, check_finite=False)
    white = 0.5 * (white + white.conj().T)
    u, lam = principal_eigenvector(white)
    v = chol @ u
    if not return_details:
        return v
    tr = float(np.real(np.trace(white)))
    flat = white.shape[0] * lam - tr <= 1e-6 * max(tr, np.finfo(float).tiny)
    return v, lam, flat, chol
