"""Matrix primitives: the exponential and the quantities derived from it."""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from .quadrature import simpson_weights

PSD_TOL = 1e-12


def expm(M):
    """Matrix exponential (Al-Mohy/Higham scaling and squaring); batched over leading axes."""
    M = np.asarray(M, dtype=float)
    if M.shape[-1] == 1:
        return np.exp(M)
    return sla.expm(M)


def expm_times(A, s, v=None):
    """``exp(s A)`` for an array of times ``s``; applied to ``v`` when given.

    ``v`` may be one vector ``(d,)`` or one vector per time ``(len(s), d)``.
    """
    A = np.asarray(A, dtype=float)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    d = A.shape[0]
    if not A.any():
        E = np.broadcast_to(np.eye(d), s.shape + (d, d))
    elif d == 1:
        E = np.exp(s * A[0, 0])[..., None, None]
    else:
        E = expm(s[..., None, None] * A)
    if v is None:
        return E
    v = np.asarray(v, dtype=float)
    return np.einsum("...ij,...j->...i", E, np.broadcast_to(v, s.shape + (d,)))


def contraction_rate(A) -> float:
    """Largest ``theta`` with ``A <= -theta I`` (in the quadratic-form sense)."""
    A = np.asarray(A, dtype=float)
    sym = 0.5 * (A + A.T)
    return float(-np.linalg.eigvalsh(sym).max()) + 0.0  # no negative zero


def operator_norm(A) -> float:
    return float(np.linalg.norm(np.asarray(A, dtype=float), 2))


def drift_integral(A, b, t: float):
    """``int_0^t exp(sA) b ds`` via the exponential of the augmented matrix."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    d = A.shape[0]
    M = np.zeros((d + 1, d + 1))
    M[:d, :d] = A * t
    M[:d, d] = b * t
    return sla.expm(M)[:d, d]


def project_psd(S, tol: float = PSD_TOL):
    """Symmetrise and clip eigenvalues below ``-tol`` (and tiny negatives) to zero."""
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    w, V = np.linalg.eigh(S)
    if (w < -max(tol, 1e-9 * np.abs(w).max(initial=0.0))).any():
        raise ValueError("matrix is not positive semidefinite")
    w = np.clip(w, 0.0, None)
    return (V * w[..., None, :]) @ np.swapaxes(V, -1, -2)


def gaussian_covariance(A, Q, t: float, n_nodes: int = 129):
    """Covariance ``int_0^t e^{sA} (2Q) e^{sA*} ds`` of the Gaussian part of the OU endpoint.

    Composite Simpson on ``n_nodes`` points, then PSD projection.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    d = A.shape[0]
    if t <= 0.0 or not Q.any():
        return np.zeros((d, d))
    if not A.any():
        return 2.0 * Q * t
    s, w = simpson_weights(0.0, t, n_nodes)
    E = expm_times(A, s)
    integrand = E @ (2.0 * Q) @ np.swapaxes(E, -1, -2)
    return project_psd(np.tensordot(w, integrand, axes=1))


def gaussian_covariance_exact(A, Q, t):
    """Van Loan's block-exponential formula, batched over an array of horizons ``t``."""
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    d = A.shape[0]
    if not A.any():
        return 2.0 * Q * t[:, None, None]
    if d == 1:
        a = A[0, 0]
        return (2.0 * Q[0, 0] * np.expm1(2.0 * a * t) / (2.0 * a))[:, None, None]
    M = np.zeros((2 * d, 2 * d))
    M[:d, :d] = -A
    M[:d, d:] = 2.0 * Q
    M[d:, d:] = A.T
    F = expm(t[:, None, None] * M)
    F22 = F[:, d:, d:]
    F12 = F[:, :d, d:]
    cov = np.swapaxes(F22, -1, -2) @ F12
    return 0.5 * (cov + np.swapaxes(cov, -1, -2))
