"""Small numeric helpers shared across the toolkit."""

from __future__ import annotations

import numpy as np

__all__ = ["meancov", "diaginprod", "dlyap", "psd_factor", "symmetrize"]


def meancov(x: np.ndarray, want_cov: bool = True):
    """Per-time sample mean and covariance of a replicated vector sequence.

    ``x`` has shape (m, n, N): n sets of N vectors of length m.  Returns
    ``mean`` of shape (m, n) and, when ``want_cov``, ``cov`` of shape
    (m, m, n) using the N-1 denominator.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise ValueError("meancov expects a (m, n, N) array")
    m, n, N = x.shape
    mean = x.mean(axis=2)
    if not want_cov:
        return mean
    if N < 2:
        raise ValueError("covariance needs at least 2 replicates")
    dev = x - mean[:, :, None]
    cov = np.einsum("itk,jtk->ijt", dev, dev) / (N - 1)
    return mean, cov


def diaginprod(A: np.ndarray, x1: np.ndarray, x2: np.ndarray | None = None) -> np.ndarray:
    """Columnwise quadratic form (x1-x2)[:,j]' A (x1-x2)[:,j].

    Matched-column reading: output j pairs column j of ``x1`` with column j
    of ``x2`` (zeros when omitted).  Returns a length-n vector.
    """
    A = np.asarray(A, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if x1.ndim == 1:
        x1 = x1[:, None]
    d = x1 if x2 is None else x1 - np.asarray(x2, dtype=float).reshape(x1.shape)
    if A.shape != (d.shape[0], d.shape[0]):
        raise ValueError("A must be square and match the vector length")
    return np.einsum("ij,ik,kj->j", d, A, d)


def symmetrize(P: np.ndarray) -> np.ndarray:
    return (P + P.T) / 2.0


def dlyap(T: np.ndarray, V: np.ndarray, tol: float = 1e-12, maxiter: int = 200) -> np.ndarray:
    """Solve P = T P T' + V by the doubling iteration.

    Requires the spectral radius of ``T`` to be < 1; raises otherwise
    (detected as non-convergence).
    """
    P = np.asarray(V, dtype=float).copy()
    A = np.asarray(T, dtype=float).copy()
    for _ in range(maxiter):
        if np.max(np.abs(A)) < tol:
            return symmetrize(P)
        P = P + A @ P @ A.T
        A = A @ A
        if not np.all(np.isfinite(P)):
            break
    raise np.linalg.LinAlgError("doubling iteration did not converge; transition not stable")


def psd_factor(S: np.ndarray) -> np.ndarray:
    """Factor L with L L' = S for a symmetric PSD matrix (eigen-based).

    Tolerates semi-definite and zero matrices, unlike Cholesky.
    """
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        return S.reshape(S.shape)
    w, U = np.linalg.eigh(symmetrize(S))
    w = np.clip(w, 0.0, None)
    return U * np.sqrt(w)[None, :]
