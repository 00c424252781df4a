"""Exact-diffuse Kalman filtering, loglikelihood, and forecasting.

Observation vectors are processed one element at a time (sequential scalar
updates), which turns every diffuse-initialization decision into a scalar
threshold and handles partially missing observations natively.  The filter
requires a diagonal per-time observation variance; models with correlated
observation noise are transformed at realization time by absorbing the
disturbance into the state (see :mod:`ssmkit.arrays`), which leaves the joint
law of the data, and hence all reported quantities, unchanged.

Per-element innovations ``v`` and variances ``F`` are sequential: element i
of time t is conditioned on elements 0..i-1 of the same time point as well as
the past.  For p = 1 they coincide with the usual innovation sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import ModelArrays, realize
from .data import TimeSeriesData, as_data
from .model import StateSpaceModel
from .options import resolve_options

try:
    from numba import njit as _njit

    def _jit(fn):
        return _njit(cache=True)(fn)
except ImportError:  # pragma: no cover - numba is a declared dependency
    def _jit(fn):
        return fn

__all__ = ["FilterResult", "kalman_filter", "loglik", "forecast", "FilterSingularError"]

_LOG2PI = float(np.log(2.0 * np.pi))


class FilterSingularError(FloatingPointError):
    """Prediction variance vanished while the innovation did not."""


def _filter_core(y, obs, Z, h, c, T, RQR, a1, P1, Pinf1, ftol, ptol, full):
    """Forward pass.  Returns per-element quantities and boundary moments.

    Written in the numba-compilable numpy subset; jitted at import.
    """
    p, n = y.shape
    m = a1.shape[0]
    ns = n if full else 0
    a_s = np.zeros((ns + 1, m))
    P_s = np.zeros((ns + 1, m, m))
    Pi_s = np.zeros((ns + 1, m, m))
    v_s = np.zeros((ns, p))
    Fs_s = np.zeros((ns, p))
    Fi_s = np.zeros((ns, p))
    Ks_s = np.zeros((ns, p, m))
    Ki_s = np.zeros((ns, p, m))
    used_s = np.zeros((ns, p), np.bool_)
    fns_s = np.zeros((ns, p), np.bool_)

    a = a1.copy()
    P = P1.copy()
    Pi = Pinf1.copy()
    pimax = 0.0
    for j in range(m):
        pimax = max(pimax, Pi[j, j])
    diffuse = pimax > ptol
    d = 0
    ll = 0.0
    nobs = 0
    err_t = -1
    if full:
        a_s[0] = a
        P_s[0] = P
        Pi_s[0] = Pi

    for t in range(n):
        tZ = t if Z.shape[0] > 1 else 0
        tH = t if h.shape[0] > 1 else 0
        tT = t if T.shape[0] > 1 else 0
        tR = t if RQR.shape[0] > 1 else 0
        tc = t if c.shape[0] > 1 else 0
        if diffuse:
            d = t + 1
        for i in range(p):
            if not obs[i, t]:
                continue
            z = Z[tZ, i]
            M = P @ z
            Fst = z @ M + h[tH, i]
            vv = y[i, t] - z @ a
            Fin = 0.0
            Mi = np.zeros(m)
            if diffuse:
                Mi = Pi @ z
                Fin = z @ Mi
                if Fin < 0.0:
                    Fin = 0.0
            if full:
                v_s[t, i] = vv
                Fs_s[t, i] = Fst
                Fi_s[t, i] = Fin
                Ks_s[t, i] = M
                Ki_s[t, i] = Mi
            if diffuse and Fin > ftol * (1.0 + abs(Fst)):
                # diffuse step, F_inf nonsingular for this element
                a = a + Mi * (vv / Fin)
                P = (
                    P
                    + np.outer(Mi, Mi) * (Fst / (Fin * Fin))
                    - (np.outer(Mi, M) + np.outer(M, Mi)) / Fin
                )
                Pi = Pi - np.outer(Mi, Mi) / Fin
                ll += -0.5 * (_LOG2PI + np.log(Fin))
                nobs += 1
                if full:
                    used_s[t, i] = True
                    fns_s[t, i] = True
            else:
                if Fst <= ftol:
                    # no innovation variance: legal only for a consistent
                    # deterministic observation, which carries no information
                    if abs(vv) <= 1e-8 * (1.0 + abs(y[i, t])):
                        continue
                    err_t = t
                    break
                a = a + M * (vv / Fst)
                P = P - np.outer(M, M) / Fst
                ll += -0.5 * (_LOG2PI + np.log(Fst) + vv * vv / Fst)
                nobs += 1
                if full:
                    used_s[t, i] = True
        if err_t >= 0:
            break
        Tt = T[tT]
        a = c[tc] + Tt @ a
        P = Tt @ (P @ Tt.T) + RQR[tR]
        P = (P + P.T) / 2.0
        if diffuse:
            Pi = Tt @ (Pi @ Tt.T)
            Pi = (Pi + Pi.T) / 2.0
            pimax = 0.0
            for j in range(m):
                pimax = max(pimax, Pi[j, j])
            if pimax <= ptol:
                Pi[:] = 0.0
                diffuse = False
        if full:
            a_s[t + 1] = a
            P_s[t + 1] = P
            Pi_s[t + 1] = Pi

    still_diffuse = diffuse
    return (a_s, P_s, Pi_s, v_s, Fs_s, Fi_s, Ks_s, Ki_s, used_s, fns_s,
            d, ll, nobs, err_t, still_diffuse)


_filter_core_jit = _jit(_filter_core)


@dataclass
class FilterResult:
    """Kalman filter output.

    ``a``/``P`` are one-step-ahead state moments at t = 0..n (n+1 slices);
    ``Pinf`` holds the diffuse variance for t = 0..d.  ``v``, ``F``, ``Finf``
    and the gain vectors ``K`` (= P Z'), ``Kinf`` (= Pinf Z') are per scalar
    element, reflecting the sequential processing order; ``Fns`` marks the
    elements handled by the nonsingular-F_inf diffuse update and ``used``
    the elements that carried information.  ``d`` is the number of initial
    time points with diffuse variance; ``diffuse_incomplete`` flags diffuse
    mass remaining at the end of the sample.
    """

    a: np.ndarray
    P: np.ndarray
    Pinf: np.ndarray
    v: np.ndarray
    F: np.ndarray
    Finf: np.ndarray
    K: np.ndarray
    Kinf: np.ndarray
    used: np.ndarray
    Fns: np.ndarray
    d: int
    loglik: float
    nobs: int
    diffuse_incomplete: bool
    missing_applied: np.ndarray
    arrays: ModelArrays

    @property
    def n(self) -> int:
        return self.v.shape[1]

    @property
    def m(self) -> int:
        """User-model state dimension (excludes augmentation)."""
        return self.arrays.m_user


def _run_filter(arr: ModelArrays, y: np.ndarray, obs: np.ndarray, tol: float,
                full: bool = True):
    yy = np.where(obs, y, 0.0)
    out = _filter_core_jit(
        yy, obs, arr.Z, arr.hdiag, arr.c, arr.T, arr.RQR,
        arr.a1, arr.P1, arr.Pinf, tol, tol, full,
    )
    err_t = out[13]
    if err_t >= 0:
        raise FilterSingularError(
            f"zero prediction variance with nonzero innovation at t={err_t}"
        )
    return out


def kalman_filter(y, model: StateSpaceModel, opts=None, **overrides) -> FilterResult:
    """Run the exact-diffuse Kalman filter over ``y``.

    ``y`` is a TimeSeriesData or a p x n array with NaN marking missing
    cells; fully missing columns trigger pure prediction steps.
    """
    opt = resolve_options(opts, **overrides)
    data = as_data(y)
    if data.p != model.p:
        raise ValueError(f"data has {data.p} rows, model expects {model.p}")
    arr = realize(model, data.n)
    (a_s, P_s, Pi_s, v_s, Fs_s, Fi_s, Ks_s, Ki_s, used_s, fns_s,
     d, ll, nobs, _err, still) = _run_filter(arr, data.values, data.observed, opt.tolerance)
    mu = arr.m_user
    v = v_s.T.copy()
    v[data.missing] = np.nan
    return FilterResult(
        a=a_s[:, :mu].T.copy(),
        P=np.ascontiguousarray(P_s[:, :mu, :mu].transpose(1, 2, 0)),
        Pinf=np.ascontiguousarray(Pi_s[: d + 1, :mu, :mu].transpose(1, 2, 0)),
        v=v,
        F=Fs_s.T.copy(),
        Finf=Fi_s.T.copy(),
        K=np.ascontiguousarray(Ks_s[:, :, :mu].transpose(2, 1, 0)),
        Kinf=np.ascontiguousarray(Ki_s[:, :, :mu].transpose(2, 1, 0)),
        used=used_s.T.copy(),
        Fns=fns_s.T.copy(),
        d=d,
        loglik=ll,
        nobs=nobs,
        diffuse_incomplete=bool(still),
        missing_applied=data.missing.copy(),
        arrays=arr,
    )


def loglik(y, model: StateSpaceModel, opts=None, **overrides) -> float:
    """Gaussian loglikelihood by prediction-error decomposition.

    Diffuse steps contribute -(log 2 pi + log F_inf)/2 per scalar element,
    the exact-diffuse convention; post-diffuse elements the usual
    -(log 2 pi + log F + v^2/F)/2.  For approximated non-Gaussian models
    pass the transformed observations from the approximation.
    """
    opt = resolve_options(opts, **overrides)
    data = as_data(y)
    if data.p != model.p:
        raise ValueError(f"data has {data.p} rows, model expects {model.p}")
    arr = realize(model, data.n)
    out = _run_filter(arr, data.values, data.observed, opt.tolerance, full=False)
    return float(out[11])


def forecast(y, model: StateSpaceModel, h: int, opts=None, **overrides):
    """h-step-ahead forecasts by filtering over appended missing columns.

    Returns (points, variances) with shapes (p, h) and (p, p, h); the
    variance is Z P Z' + H over the appended range.
    """
    if h < 1:
        raise ValueError("forecast horizon must be >= 1")
    opt = resolve_options(opts, **overrides)
    data = as_data(y).extended(h)
    n0 = data.n - h
    res = kalman_filter(data, model, opt)
    arr = res.arrays
    pts = np.zeros((model.p, h))
    var = np.zeros((model.p, model.p, h))
    for k in range(h):
        t = n0 + k
        Zt = arr.at(arr.Z, t)
        Ht = arr.at(arr.Hfull, t)
        af = res.a[:, t]
        Pf = res.P[:, :, t]
        Zu = Zt[:, : arr.m_user] if arr.augmented else Zt
        pts[:, k] = Zu @ af
        var[:, :, k] = Zu @ Pf @ Zu.T + Ht
        if res.d > t:
            var[:, :, k] = np.nan  # diffuse mass still present: variance undefined
    return pts, var
