"""State, disturbance, fast, batch and simulation smoothing; sampling; signals.

The backward pass mirrors the filter's sequential element processing: the
transition transpose is applied first, then one scalar update per observed
element in reverse order, with the diffuse branch chosen per element exactly
as the filter classified it.  Observation disturbances are recovered through
the identity eps = y - Z alphahat (exact for additive models), which also
holds when correlated observation noise was absorbed into the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import ModelArrays, realize
from .data import TimeSeriesData, as_data
from .kalman import _jit, _run_filter
from .mathutil import psd_factor
from .model import StateSpaceModel
from .options import resolve_options

__all__ = [
    "SmoothResult",
    "smooth_all",
    "state_smooth",
    "fast_state_smooth",
    "batch_smooth",
    "disturb_smooth",
    "sim_smooth",
    "signal",
    "sample",
]


def _smooth_core(Z, T, QRt, Q, v_s, Fs_s, Fi_s, Ks_s, Ki_s, used_s, fns_s,
                 a_s, P_s, Pi_s, d, want_var):
    """Backward recursion over stored filter quantities (numba-compiled)."""
    n, p = v_s.shape
    m = a_s.shape[1]
    r = QRt.shape[1]
    nv = n if want_var else 0

    alphahat = np.zeros((n, m))
    V = np.zeros((nv, m, m))
    r_post = np.zeros((n, m))
    N_post = np.zeros((nv, m, m))
    r1_post = np.zeros((d, m))
    N1_post = np.zeros((min(d, nv), m, m))
    N2_post = np.zeros((min(d, nv), m, m))
    etahat = np.zeros((n, r))
    etavar = np.zeros((nv, r, r))

    r0 = np.zeros(m)
    r1 = np.zeros(m)
    N0 = np.zeros((m, m))
    N1 = np.zeros((m, m))
    N2 = np.zeros((m, m))
    eye = np.eye(m)

    for t in range(n - 1, -1, -1):
        tZ = t if Z.shape[0] > 1 else 0
        tT = t if T.shape[0] > 1 else 0
        tQ = t if QRt.shape[0] > 1 else 0
        # state disturbance first: eta_t = Q R' r_t with r entering this step
        etahat[t] = QRt[tQ] @ r0
        if want_var:
            QR = QRt[tQ]
            etavar[t] = Q[tQ] - QR @ N0 @ QR.T
        # transition transpose
        Tt = T[tT]
        r0 = Tt.T @ r0
        if want_var:
            N0 = Tt.T @ N0 @ Tt
        if t < d:
            r1 = Tt.T @ r1
            if want_var:
                N1 = Tt.T @ N1 @ Tt
                N2 = Tt.T @ N2 @ Tt
        # scalar elements in reverse order
        for i in range(p - 1, -1, -1):
            if not used_s[t, i]:
                continue
            z = Z[tZ, i]
            vv = v_s[t, i]
            Fst = Fs_s[t, i]
            if fns_s[t, i]:
                Fin = Fi_s[t, i]
                K0 = Ki_s[t, i] / Fin
                K1 = Ks_s[t, i] / Fin - Ki_s[t, i] * (Fst / (Fin * Fin))
                L = eye - np.outer(K0, z)
                L1 = -np.outer(K1, z)
                r1 = z * (vv / Fin) + L.T @ r1 + L1.T @ r0
                r0 = L.T @ r0
                if want_var:
                    zz = np.outer(z, z)
                    N2 = (
                        zz * (-Fst / (Fin * Fin))
                        + L.T @ N2 @ L
                        + L.T @ N1 @ L1
                        + L1.T @ N1 @ L
                        + L1.T @ N0 @ L1
                    )
                    N1 = zz / Fin + L.T @ N1 @ L + L1.T @ N0 @ L
                    N0 = L.T @ N0 @ L
            else:
                K = Ks_s[t, i] / Fst
                L = eye - np.outer(K, z)
                r0 = z * (vv / Fst) + L.T @ r0
                if want_var:
                    if t < d:
                        N1 = N1 @ L
                    N0 = np.outer(z, z) / Fst + L.T @ N0 @ L
        # smoothed state at t
        Pt = P_s[t]
        alphahat[t] = a_s[t] + Pt @ r0
        if t < d:
            alphahat[t] = alphahat[t] + Pi_s[t] @ r1
            r1_post[t] = r1
        r_post[t] = r0
        if want_var:
            Vt = Pt - Pt @ N0 @ Pt
            if t < d:
                Pit = Pi_s[t]
                B = Pit @ N1 @ Pt
                Vt = Vt - B - B.T - Pit @ N2 @ Pit
                N1_post[t] = N1
                N2_post[t] = N2
            V[t] = (Vt + Vt.T) / 2.0
            N_post[t] = N0
    return alphahat, V, r_post, N_post, r1_post, N1_post, N2_post, etahat, etavar


_smooth_core_jit = _jit(_smooth_core)


@dataclass
class SmoothResult:
    """Smoothed states, disturbances, variances and backward cumulants.

    ``r``/``N`` hold the cumulants weighting alphahat_t (the values reached
    after absorbing time t in the backward pass); ``r1``/``N1``/``N2`` are
    their diffuse companions, retained for t < d.
    """

    alphahat: np.ndarray   # (m, n)
    V: np.ndarray          # (m, m, n)
    epshat: np.ndarray     # (p, n)
    epsvar: np.ndarray     # (p, p, n)
    etahat: np.ndarray     # (r, n)
    etavar: np.ndarray     # (r, r, n)
    r: np.ndarray          # (m, n)
    N: np.ndarray          # (m, m, n)
    r1: np.ndarray
    N1: np.ndarray
    N2: np.ndarray
    d: int
    loglik: float


def _smooth_arrays(arr: ModelArrays, y: np.ndarray, obs: np.ndarray, tol: float,
                   want_var: bool):
    (a_s, P_s, Pi_s, v_s, Fs_s, Fi_s, Ks_s, Ki_s, used_s, fns_s,
     d, ll, nobs, _err, _still) = _run_filter(arr, y, obs, tol)
    nQR = max(arr.Q.shape[0], arr.R.shape[0])
    QRt = np.empty((nQR, arr.r, arr.m))
    Qm = np.empty((nQR, arr.r, arr.r))
    for t in range(nQR):
        Rt = arr.at(arr.R, t)
        Qt = arr.at(arr.Q, t)
        QRt[t] = Qt @ Rt.T
        Qm[t] = Qt
    out = _smooth_core_jit(
        arr.Z, arr.T, QRt, Qm, v_s, Fs_s, Fi_s, Ks_s, Ki_s, used_s, fns_s,
        a_s[:-1], P_s[:-1], Pi_s[:-1], d, want_var,
    )
    return out, d, ll


def smooth_all(y, model: StateSpaceModel, opts=None, variances: bool = True,
               **overrides) -> SmoothResult:
    """Full state-and-disturbance smoothing pass."""
    opt = resolve_options(opts, **overrides)
    data = as_data(y)
    if data.p != model.p:
        raise ValueError(f"data has {data.p} rows, model expects {model.p}")
    arr = realize(model, data.n)
    yy = np.where(data.observed, data.values, 0.0)
    (alphahat, V, r_post, N_post, r1_post, N1_post, N2_post, etahat, etavar), d, ll = \
        _smooth_arrays(arr, data.values, data.observed, opt.tolerance, variances)

    n, p, mu, ru = data.n, model.p, arr.m_user, model.r
    if arr.augmented:
        eps = alphahat[:, mu:].T.copy()
        epsvar = np.ascontiguousarray(V[:, mu:, mu:].transpose(1, 2, 0)) if variances \
            else np.zeros((p, p, 0))
        etah = etahat[:, :ru].T.copy()
        etav = np.ascontiguousarray(etavar[:, :ru, :ru].transpose(1, 2, 0)) if variances \
            else np.zeros((ru, ru, 0))
    else:
        eps = np.zeros((p, n))
        for t in range(n):
            Zt = arr.at(arr.Z, t)
            ok = data.observed[:, t]
            eps[ok, t] = yy[ok, t] - Zt[ok] @ alphahat[t]
        if variances:
            epsvar = np.zeros((p, p, n))
            for t in range(n):
                Zt = arr.at(arr.Z, t)
                ok = data.observed[:, t]
                Zo = Zt[ok]
                block = Zo @ V[t] @ Zo.T
                epsvar[np.ix_(ok, ok, [t])] = block[:, :, None]
                hmiss = arr.at(arr.hdiag, t)
                idx = np.flatnonzero(~ok)
                epsvar[idx, idx, t] = hmiss[idx]
        else:
            epsvar = np.zeros((p, p, 0))
        etah = etahat.T.copy()
        etav = np.ascontiguousarray(etavar.transpose(1, 2, 0)) if variances \
            else np.zeros((ru, ru, 0))

    return SmoothResult(
        alphahat=alphahat[:, :mu].T.copy(),
        V=np.ascontiguousarray(V[:, :mu, :mu].transpose(1, 2, 0)) if variances
        else np.zeros((mu, mu, 0)),
        epshat=eps,
        epsvar=epsvar,
        etahat=etah,
        etavar=etav,
        r=r_post[:, :mu].T.copy(),
        N=np.ascontiguousarray(N_post[:, :mu, :mu].transpose(1, 2, 0)) if variances
        else np.zeros((mu, mu, 0)),
        r1=r1_post[:, :mu].T.copy(),
        N1=np.ascontiguousarray(N1_post[:, :mu, :mu].transpose(1, 2, 0)) if variances
        else np.zeros((mu, mu, 0)),
        N2=np.ascontiguousarray(N2_post[:, :mu, :mu].transpose(1, 2, 0)) if variances
        else np.zeros((mu, mu, 0)),
        d=d,
        loglik=ll,
    )


def state_smooth(y, model: StateSpaceModel, opts=None, **overrides):
    """Smoothed state means and variances (alphahat, V)."""
    res = smooth_all(y, model, opts, variances=True, **overrides)
    return res.alphahat, res.V


def fast_state_smooth(y, model: StateSpaceModel, opts=None, **overrides) -> np.ndarray:
    """Smoothed state means only; skips all variance recursions."""
    return smooth_all(y, model, opts, variances=False, **overrides).alphahat


def disturb_smooth(y, model: StateSpaceModel, opts=None, **overrides):
    """Smoothed disturbances (epshat, etahat, epsvar, etavar)."""
    res = smooth_all(y, model, opts, variances=True, **overrides)
    return res.epshat, res.etahat, res.epsvar, res.etavar


# -- batched fast smoothing -------------------------------------------------

def _batch_fast(arr: ModelArrays, filt, Y: np.ndarray):
    """Fast smoothing of many series sharing one model and missing pattern.

    ``Y`` is (p, n, N).  Gain sequences are data-independent, so only the
    innovation/state/cumulant vectors carry the replicate axis.
    """
    (a_s, P_s, Pi_s, v_s, Fs_s, Fi_s, Ks_s, Ki_s, used_s, fns_s,
     d, _ll, _nobs, _e, _s) = filt
    p, n, N = Y.shape
    m = arr.m
    a = np.repeat(arr.a1[:, None], N, axis=1)
    arep = np.zeros((n, m, N))
    vrep = np.zeros((n, p, N))
    for t in range(n):
        Zt = arr.at(arr.Z, t)
        arep[t] = a
        for i in range(p):
            if not used_s[t, i]:
                continue
            z = Zt[i]
            vv = Y[i, t] - z @ a
            vrep[t, i] = vv
            if fns_s[t, i]:
                a = a + np.outer(Ki_s[t, i] / Fi_s[t, i], vv)
            else:
                a = a + np.outer(Ks_s[t, i] / Fs_s[t, i], vv)
        Tt = arr.at(arr.T, t)
        a = arr.at(arr.c, t)[:, None] + Tt @ a

    r0 = np.zeros((m, N))
    r1 = np.zeros((m, N))
    alphahat = np.zeros((n, m, N))
    etahat = np.zeros((n, arr.r, N))
    eye = np.eye(m)
    for t in range(n - 1, -1, -1):
        Zt = arr.at(arr.Z, t)
        Rt = arr.at(arr.R, t)
        Qt = arr.at(arr.Q, t)
        etahat[t] = (Qt @ Rt.T) @ r0
        Tt = arr.at(arr.T, t)
        r0 = Tt.T @ r0
        if t < d:
            r1 = Tt.T @ r1
        for i in range(p - 1, -1, -1):
            if not used_s[t, i]:
                continue
            z = Zt[i]
            vv = vrep[t, i]
            if fns_s[t, i]:
                Fin = Fi_s[t, i]
                K0 = Ki_s[t, i] / Fin
                K1 = Ks_s[t, i] / Fin - Ki_s[t, i] * (Fs_s[t, i] / (Fin * Fin))
                L = eye - np.outer(K0, z)
                L1 = -np.outer(K1, z)
                r1 = np.outer(z, vv / Fin) + L.T @ r1 + L1.T @ r0
                r0 = L.T @ r0
            else:
                K = Ks_s[t, i] / Fs_s[t, i]
                L = eye - np.outer(K, z)
                r0 = np.outer(z, vv / Fs_s[t, i]) + L.T @ r0
        alphahat[t] = arep[t] + P_s[t] @ r0
        if t < d:
            alphahat[t] = alphahat[t] + Pi_s[t] @ r1
    return alphahat, etahat


def batch_smooth(y, model: StateSpaceModel, opts=None, **overrides):
    """Fast smoothing of N stacked datasets sharing one model.

    ``y`` is (p, n, N) with no missing values (the shared-gain trick requires
    a common observation pattern).  Returns (alphahat, epshat, etahat) with
    shapes (m, n, N), (p, n, N), (r, n, N).
    """
    opt = resolve_options(opts, **overrides)
    Y = np.asarray(y, dtype=float)
    if Y.ndim != 3:
        raise ValueError("batch_smooth expects (p, n, N) data")
    if np.isnan(Y).any():
        raise ValueError("batch smoothing does not allow missing values")
    p, n, N = Y.shape
    if p != model.p:
        raise ValueError(f"data has {p} rows, model expects {model.p}")
    arr = realize(model, n)
    obs = np.ones((p, n), dtype=bool)
    filt = _run_filter(arr, Y[:, :, 0], obs, opt.tolerance)
    alphahat, etahat = _batch_fast(arr, filt, Y)
    mu, ru = arr.m_user, model.r
    eps = np.zeros((p, n, N))
    for t in range(n):
        Zt = arr.at(arr.Z, t)[:, :mu] if arr.augmented else arr.at(arr.Z, t)
        eps[:, t] = Y[:, t] - Zt @ alphahat[t, :mu]
    return (
        np.ascontiguousarray(alphahat[:, :mu].transpose(1, 0, 2)),
        eps,
        np.ascontiguousarray(etahat[:, :ru].transpose(1, 0, 2)),
    )


# -- random draws ------------------------------------------------------------

def _replicate_normals(seed, j, shapes):
    """Independent standard normal blocks for replicate j (counter-based)."""
    bg = np.random.Philox(key=(int(seed) % (2**64), int(j)))
    g = np.random.Generator(bg)
    return [g.standard_normal(s) for s in shapes]


def _draw_unconditional(model: StateSpaceModel, n: int, N: int, seed,
                        antithetic: bool, kappa: float):
    """Draws of (alpha, y, eps, eta) from the model; diffuse prior variances
    are replaced by ``kappa``.  Replicate 2k+1 negates the standard normals
    of replicate 2k when antithetic."""
    p, m, r = model.p, model.m, model.r
    Z = model.Z.realize(n)
    T = model.T.realize(n)
    R = model.R.realize(n)
    Q = model.Q.mat.realize(n)
    H = model.H.mat.realize(n)
    c = model.c.realize(n)[:, :, 0]
    a1 = model.a1.mat[:, 0]
    P1 = model.P1.mat.copy()
    dif = np.isinf(np.diag(P1))
    P1[np.isinf(P1)] = 0.0
    np.fill_diagonal(P1, np.where(dif, kappa, np.diag(P1)))

    LP = psd_factor(P1)
    LH = [psd_factor(H[t]) for t in range(H.shape[0])]
    LQ = [psd_factor(Q[t]) for t in range(Q.shape[0])]

    ueps = np.zeros((N, p, n))
    ueta = np.zeros((N, r, n))
    ua1 = np.zeros((N, m))
    for j in range(N):
        if antithetic and j % 2 == 1:
            ueps[j], ueta[j], ua1[j] = -ueps[j - 1], -ueta[j - 1], -ua1[j - 1]
        else:
            e, t_, a_ = _replicate_normals(seed, j, [(p, n), (r, n), (m,)])
            ueps[j], ueta[j], ua1[j] = e, t_, a_

    eps = np.zeros((p, n, N))
    eta = np.zeros((r, n, N))
    for t in range(n):
        eps[:, t] = (LH[t if len(LH) > 1 else 0] @ ueps[:, :, t].T)
        eta[:, t] = (LQ[t if len(LQ) > 1 else 0] @ ueta[:, :, t].T)
    alpha = np.zeros((m, n, N))
    y = np.zeros((p, n, N))
    acur = a1[:, None] + LP @ ua1.T
    for t in range(n):
        alpha[:, t] = acur
        Zt = Z[t if Z.shape[0] > 1 else 0]
        y[:, t] = Zt @ acur + eps[:, t]
        Tt = T[t if T.shape[0] > 1 else 0]
        Rt = R[t if R.shape[0] > 1 else 0]
        acur = c[t if c.shape[0] > 1 else 0][:, None] + Tt @ acur + Rt @ eta[:, t]
    return y, alpha, eps, eta


def sample(model: StateSpaceModel, n: int, N: int = 1, seed: int = 0,
           opts=None, **overrides):
    """Unconditional observation samples from the model.

    Returns (y, alpha, eps, eta) with a replicate axis last; reproducible
    given ``seed`` (replicate j uses a counter-based stream keyed (seed, j)).
    """
    opt = resolve_options(opts, **overrides)
    if N < 1:
        raise ValueError("N must be >= 1")
    if not model.gauss_ready:
        raise ValueError("sampling requires a Gaussian (or approximated) model")
    return _draw_unconditional(model, n, N, seed, False, opt.diffuse_kappa)


def sim_smooth(y, model: StateSpaceModel, N: int, antithetic: bool = False,
               seed: int = 0, opts=None, **overrides):
    """Draw (alpha, eps, eta) conditional on the data.

    Unconditional draws are corrected by two smoothing passes:
    x_tilde = x_hat(y) - x_hat(y+) + x+.  With ``antithetic`` the underlying
    normals come in +/- pairs, so pair averages of the draws equal the
    smoothed means exactly.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    opt = resolve_options(opts, **overrides)
    data = as_data(y)
    n, p = data.n, data.p
    if p != model.p:
        raise ValueError(f"data has {p} rows, model expects {model.p}")
    arr = realize(model, n)
    obs = data.observed

    yplus, aplus, eplus, etaplus = _draw_unconditional(
        model, n, N, seed, antithetic, opt.diffuse_kappa
    )

    filt = _run_filter(arr, np.where(obs, data.values, 0.0), obs, opt.tolerance)
    # replicate 0 carries the actual data so one batched pass smooths all
    Yall = np.concatenate([np.where(obs, data.values, 0.0)[:, :, None], yplus], axis=2)
    ah, etah = _batch_fast(arr, filt, Yall)
    mu, ru = arr.m_user, model.r

    ahat = ah[:, :mu, 0]
    ahat_plus = ah[:, :mu, 1:]
    alphatilde = (ahat[:, :, None] - ahat_plus + aplus.transpose(1, 0, 2)).transpose(1, 0, 2)

    etahat = etah[:, :ru, 0]
    etahat_plus = etah[:, :ru, 1:]
    etatilde = (etahat[:, :, None] - etahat_plus + etaplus.transpose(1, 0, 2)).transpose(1, 0, 2)

    # eps via the additive identity on observed cells; smoothed mean is zero
    # on missing cells of the actual data pass
    epstilde = np.zeros((p, n, N))
    for t in range(n):
        Zt = arr.at(arr.Z, t)[:, :mu] if arr.augmented else arr.at(arr.Z, t)
        if arr.augmented:
            ehat_t = ah[t, mu:, 0]
            ehat_plus_t = ah[t, mu:, 1:]
            epstilde[:, t] = ehat_t[:, None] - ehat_plus_t + eplus[:, t]
        else:
            ok = obs[:, t]
            ehat_t = np.zeros(p)
            ehat_t[ok] = data.values[ok, t] - Zt[ok] @ ahat[t]
            ehat_plus_t = np.zeros((p, N))
            ehat_plus_t[ok] = yplus[ok, t] - Zt[ok] @ ahat_plus[t]
            epstilde[:, t] = ehat_t[:, None] - ehat_plus_t + eplus[:, t]
    return alphatilde, epstilde, etatilde


def signal(alpha, model: StateSpaceModel):
    """Per-component signals Z[:, span_k] alpha[span_k].

    Returns (M, n) when p = 1, else (p, n, M), over the components that
    carry states.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim == 1:
        alpha = alpha[None, :]
    m, n = alpha.shape
    if m != model.m:
        raise ValueError(f"alpha has {m} rows, model has {model.m} states")
    comps = [cpt for cpt in model.components if cpt.width > 0]
    if not comps:
        from .model import Component

        comps = [Component("signal", 0, model.m, {})]
    Z = model.Z.realize(n)
    p = model.p
    out = np.zeros((p, n, len(comps)))
    for k, cpt in enumerate(comps):
        for t in range(n):
            Zt = Z[t if Z.shape[0] > 1 else 0]
            out[:, t, k] = Zt[:, cpt.start : cpt.stop] @ alpha[cpt.start : cpt.stop, t]
    if p == 1:
        return out[0].T.copy()
    return out
