"""Realization of a model into dense arrays consumed by the filter kernels.

The filter processes observation elements one at a time, which requires a
diagonal observation variance per time step.  Models with a non-diagonal H
are transformed here by augmenting the observation disturbance into the
state: the joint law of the data is unchanged, so likelihoods and state
estimates agree with the untransformed model, and the observation
disturbance becomes readable as a state component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import StateSpaceModel

__all__ = ["ModelArrays", "realize"]


@dataclass
class ModelArrays:
    """Dense system matrices; leading axis has length 1 (static) or n."""

    p: int
    m: int
    r: int
    n: int
    Z: np.ndarray      # (nZ, p, m)
    hdiag: np.ndarray  # (nH, p) diagonal of H (zero when augmented)
    Hfull: np.ndarray  # (nH, p, p) original observation variance
    T: np.ndarray      # (nT, m, m)
    R: np.ndarray      # (nR, m, r)
    Q: np.ndarray      # (nQ, r, r)
    RQR: np.ndarray    # (nRQ, m, m)
    c: np.ndarray      # (nc, m)
    a1: np.ndarray     # (m,)
    P1: np.ndarray     # (m, m) finite part
    Pinf: np.ndarray   # (m, m) diffuse marker matrix (binary diagonal)
    augmented: bool
    m_user: int        # state dimension of the user's model
    p_user: int

    def at(self, arr: np.ndarray, t: int) -> np.ndarray:
        return arr[t if arr.shape[0] > 1 else 0]


def _is_diag(mats: np.ndarray) -> bool:
    p = mats.shape[1]
    if p <= 1:
        return True
    off = ~np.eye(p, dtype=bool)
    return bool(np.all(mats[:, off] == 0.0))


def realize(model: StateSpaceModel, n: int, allow_nongauss: bool = False) -> ModelArrays:
    """Materialize model matrices for t = 0..n-1 and split the diffuse prior.

    Rejects models whose non-Gaussian parts have no baked-in Gaussian
    approximation unless ``allow_nongauss`` (used by the approximation loop
    itself and by forward sampling of Gaussian parts).
    """
    if not model.gauss_ready and not allow_nongauss:
        raise ValueError(
            "model has non-Gaussian disturbances; build its Gaussian "
            "approximation first (nongauss.gauss_approximate)"
        )
    p, m, r = model.p, model.m, model.r
    Z = model.Z.realize(n)
    H = model.H.mat.realize(n)
    T = model.T.realize(n)
    R = model.R.realize(n)
    Q = model.Q.mat.realize(n)
    c = model.c.realize(n)[:, :, 0]
    a1 = model.a1.mat[:, 0].copy()
    P1 = model.P1.mat.copy()
    dif = np.isinf(np.diag(P1))
    Pinf = np.diag(dif.astype(float))
    P1fin = P1.copy()
    P1fin[np.isinf(P1fin)] = 0.0
    np.fill_diagonal(P1fin, np.where(dif, 0.0, np.diag(P1fin)))

    if not _is_diag(H):
        return _augment(p, m, r, n, Z, H, T, R, Q, c, a1, P1fin, Pinf)

    nRQ = max(R.shape[0], Q.shape[0])
    RQR = np.empty((nRQ, m, m))
    QRt = None
    for t in range(nRQ):
        Rt = R[t if R.shape[0] > 1 else 0]
        Qt = Q[t if Q.shape[0] > 1 else 0]
        RQR[t] = Rt @ Qt @ Rt.T
    hdiag = np.einsum("tii->ti", H).copy()
    return ModelArrays(
        p=p, m=m, r=r, n=n, Z=Z, hdiag=hdiag, Hfull=H, T=T, R=R, Q=Q, RQR=RQR,
        c=c, a1=a1, P1=P1fin, Pinf=Pinf, augmented=False, m_user=m, p_user=p,
    )


def _augment(p, m, r, n, Z, H, T, R, Q, c, a1, P1fin, Pinf):
    """Move eps into the state: alpha' = [alpha; eps], H' = 0."""
    ma = m + p
    ra = r + p
    nZ = Z.shape[0]
    Za = np.zeros((nZ, p, ma))
    Za[:, :, :m] = Z
    Za[:, :, m:] = np.eye(p)
    nT = T.shape[0]
    Ta = np.zeros((nT, ma, ma))
    Ta[:, :m, :m] = T
    nR = max(R.shape[0], 1)
    Ra = np.zeros((nR, ma, ra))
    Ra[:, :m, :r] = R
    Ra[:, m:, r:] = np.eye(p)
    nQ = max(Q.shape[0], H.shape[0])
    Qa = np.zeros((nQ, ra, ra))
    for t in range(nQ):
        Qa[t, :r, :r] = Q[t if Q.shape[0] > 1 else 0]
        # disturbance feeding eps at t+1 must carry H_{t+1}
        th = min(t + 1, n - 1) if H.shape[0] > 1 else 0
        Qa[t, r:, r:] = H[th]
    ca = np.zeros((c.shape[0], ma))
    ca[:, :m] = c
    a1a = np.concatenate([a1, np.zeros(p)])
    P1a = np.zeros((ma, ma))
    P1a[:m, :m] = P1fin
    P1a[m:, m:] = H[0]
    Pinfa = np.zeros((ma, ma))
    Pinfa[:m, :m] = Pinf
    nRQ = max(Ra.shape[0], Qa.shape[0])
    RQR = np.empty((nRQ, ma, ma))
    for t in range(nRQ):
        Rt = Ra[t if Ra.shape[0] > 1 else 0]
        Qt = Qa[t if Qa.shape[0] > 1 else 0]
        RQR[t] = Rt @ Qt @ Rt.T
    hdiag = np.zeros((1, p))
    return ModelArrays(
        p=p, m=ma, r=ra, n=n, Z=Za, hdiag=hdiag, Hfull=H, T=Ta, R=Ra, Q=Qa,
        RQR=RQR, c=ca, a1=a1a, P1=P1a, Pinf=Pinfa, augmented=True,
        m_user=m, p_user=p,
    )
