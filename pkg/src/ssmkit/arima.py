"""ARIMA tooling: canonical decomposition, automatic selection, diagnostics.

The decomposition splits an ARIMA pseudo-spectrum by partial fractions over
the per-component AR factors, subtracts each component's exact spectral
minimum (computed via a Chebyshev change of variable, so admissibility is
checked against the continuous minimum, not a grid), assigns the sum of the
minima to the irregular, and refactors each numerator by root extraction on
the unit circle.

Selection is TRAMO-style: iterative unit-root thresholding on low-order AR
fits chooses the differencing orders, then a BIC grid over ARMA orders picks
(p, q) (and seasonal orders when a period is given).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from .catalog import predefined
from .data import as_data
from .estimation import fit
from .kalman import forecast as _forecast
from .model import StateSpaceModel
from .options import resolve_options
from .polyutil import combined_lag_poly, diff_poly, polypow, seasonal_sum_poly

__all__ = [
    "ArimaSpec",
    "HtdResult",
    "htd",
    "ssmhtd",
    "arimaselect",
    "armadegree",
    "diffdegree",
    "loglevel",
    "randarma",
    "oosforecast",
    "DecompositionError",
]

log = logging.getLogger(__name__)


class DecompositionError(ValueError):
    """The canonical decomposition is not admissible for these parameters."""


@dataclass(frozen=True)
class ArimaSpec:
    p: int
    d: int
    q: int
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = 1
    mean: bool = False

    def build(self) -> StateSpaceModel:
        if self.s > 1:
            return predefined("sarima", self.p, self.d, self.q,
                              self.P, self.D, self.Q, self.s, self.mean)
        return predefined("arima", self.p, self.d, self.q, self.mean)


@dataclass
class HtdResult:
    """Per-component MA polynomials (increasing order) and innovation
    variances; the irregular variance sits last in ``ksivar``."""

    theta: list
    ksivar: list


# --------------------------------------------------------------------------
# symmetric Laurent polynomials (spectra), stored as Chebyshev coefficients
# in x = cos(omega): |a(e^{i w})|^2 <-> polynomial of degree deg(a) in x.


def _spec_from_poly(a) -> np.ndarray:
    """Chebyshev coefficients of |a(e^{i w})|^2 for a real lag polynomial."""
    a = np.asarray(a, dtype=float)
    laur = np.convolve(a, a[::-1])  # j = -g..g
    g = a.size - 1
    c = laur[g:].copy()
    c[1:] *= 2.0
    return c


def _spec_mul(c1, c2) -> np.ndarray:
    return _cheb.chebmul(c1, c2)


def _spec_eval(c, omega) -> np.ndarray:
    return _cheb.chebval(np.cos(omega), c)


def _spec_to_laurent(c) -> np.ndarray:
    """Chebyshev coefficients back to full Laurent coefficients j=-g..g."""
    g = len(c) - 1
    half = np.concatenate([[c[0]], np.asarray(c[1:]) / 2.0])
    laur = np.zeros(2 * g + 1)
    laur[g] = half[0]
    for j in range(1, g + 1):
        laur[g + j] = half[j]
        laur[g - j] = half[j]
    return laur


def _spec_min(num, den) -> float:
    """Minimum of num(x)/den(x) on x in [-1, 1], den >= 0 with possible
    zeros (unit-root frequencies, where the ratio diverges to +inf for an
    admissible component).  Evaluates at the ratio's critical points and the
    endpoints, away from the denominator's zeros."""
    num = np.atleast_1d(np.asarray(num, dtype=float))
    den = np.atleast_1d(np.asarray(den, dtype=float))
    grid = np.cos(np.linspace(0.0, np.pi, 513))
    dvals = _cheb.chebval(grid, den)
    dscale = float(np.abs(dvals).max())
    dtol = 1e-9 * max(dscale, 1e-300)
    # admissibility at the poles: the numerator may not be negative there
    if len(den) > 1:
        droots = _cheb.chebroots(den)
        dreal = droots[np.abs(droots.imag) < 1e-7].real
        dreal = dreal[(dreal >= -1.0) & (dreal <= 1.0)]
        if dreal.size:
            nscale = max(float(np.abs(_cheb.chebval(grid, num)).max()), 1e-300)
            bad = _cheb.chebval(dreal, num) < -1e-7 * nscale
            if np.any(bad):
                raise DecompositionError(
                    "component numerator negative at a unit-root frequency"
                )
    dn = _cheb.chebder(num) if len(num) > 1 else np.zeros(1)
    dd = _cheb.chebder(den) if len(den) > 1 else np.zeros(1)
    crit = _cheb.chebsub(_spec_mul(dn, den), _spec_mul(num, dd))
    xs = [np.array([-1.0, 1.0]), grid]
    if len(crit) > 1 and np.any(np.abs(crit) > 1e-300):
        roots = _cheb.chebroots(crit)
        real = roots[np.abs(roots.imag) < 1e-9].real
        xs.append(real[(real >= -1.0) & (real <= 1.0)])
    x = np.concatenate(xs)
    dv = _cheb.chebval(x, den)
    ok = dv > dtol
    if not np.any(ok):
        return 0.0
    vals = _cheb.chebval(x[ok], num) / dv[ok]
    return float(vals.min())


def _spectral_factor(c, tol=1e-10):
    """Factor a nonnegative spectrum into (theta, var) with theta(0) = 1.

    Root extraction on the full Laurent polynomial, keeping the roots inside
    (or on) the unit circle; the variance matches the zero-lag coefficient.
    """
    laur = _spec_to_laurent(c)
    while laur.size > 1 and abs(laur[0]) < 1e-13 * max(1.0, np.abs(laur).max()):
        laur = laur[1:-1]
    if laur.size <= 1:
        var = float(laur[0]) if laur.size else 0.0
        return np.array([1.0]), max(var, 0.0)
    roots = np.roots(laur[::-1])
    inside = np.sort_complex(roots[np.abs(roots) <= 1.0 + 1e-9])
    g = (laur.size - 1) // 2
    if inside.size > g:
        inside = inside[np.argsort(np.abs(inside))][:g]
    theta = np.real(np.polynomial.polynomial.polyfromroots(inside))
    if abs(theta[0]) < 1e-12:
        raise DecompositionError("spectral factor has a zero constant term")
    theta = theta / theta[0]
    var = float(laur[g] / np.sum(theta**2))
    resid = np.max(np.abs(_spec_from_poly(theta) * var - np.asarray(c)))
    if resid > max(tol, 1e-8 * max(1.0, np.abs(c).max())):
        raise DecompositionError(f"spectral factorization residual {resid:.2e}")
    return theta, var


def htd(d: int, D: int, s: int, Phi, Theta, etavar: float = 1.0) -> HtdResult:
    """Canonical decomposition of an ARIMA pseudo-spectrum.

    ``Phi`` lists per-component AR factor polynomials (increasing order,
    leading 1, mutually coprime); ``Theta`` is the overall MA polynomial.
    Returns per-component MA factors and variances, irregular last.
    """
    Phi = [np.asarray(f, dtype=float) for f in Phi]
    Theta = np.asarray(Theta, dtype=float)
    if etavar < 0:
        raise DecompositionError("innovation variance must be nonnegative")
    num = _spec_from_poly(Theta) * etavar
    dens = [_spec_from_poly(f) for f in Phi]

    if not Phi:
        return HtdResult([], [float(etavar * np.sum(Theta**2))]) if Theta.size == 1 \
            else _extra_only(num)

    degs = [len(c) - 1 for c in dens]
    G = sum(degs)
    gN = len(num) - 1
    degR = max(0, gN - G)

    # linear system in the unknown numerator coefficients
    cols = []
    for k in range(len(dens)):
        other = np.array([1.0])
        for j, dj in enumerate(dens):
            if j != k:
                other = _spec_mul(other, dj)
        for c in range(degs[k]):
            basis = np.zeros(c + 1)
            basis[c] = 1.0
            cols.append(_spec_mul(basis, other))
    allden = np.array([1.0])
    for dj in dens:
        allden = _spec_mul(allden, dj)
    if gN >= G:
        for c in range(degR + 1):
            basis = np.zeros(c + 1)
            basis[c] = 1.0
            cols.append(_spec_mul(basis, allden))

    J = max(G - 1, gN)
    A = np.zeros((J + 1, len(cols)))
    for i, col in enumerate(cols):
        A[: len(col), i] = col
    b = np.zeros(J + 1)
    b[: len(num)] = num
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)

    nums, pos = [], 0
    for k in range(len(dens)):
        nums.append(coef[pos : pos + degs[k]])
        pos += degs[k]
    rem = coef[pos:] if degR or gN >= G else np.zeros(0)

    # canonicalization: shift each component down by its exact minimum
    irregular = float(rem[0]) if rem.size else 0.0
    thetas, ksivar = [], []
    for k, (nk, dk) in enumerate(zip(nums, dens)):
        m = _spec_min(nk, dk)
        canon = _cheb.chebsub(nk, m * np.asarray(dk))
        canon = np.atleast_1d(np.trim_zeros(canon, "b"))
        if canon.size == 0:
            canon = np.zeros(1)
        irregular += m
        th, var = _spectral_factor(canon)
        if var < -1e-8:
            raise DecompositionError(f"component {k} has negative variance {var:.2e}")
        thetas.append(th)
        ksivar.append(max(var, 0.0))
    if rem.size > 1:
        # non-constant remainder: an extra MA component, canonicalized too
        m = _spec_min(rem, np.array([1.0]))
        canon = rem.copy()
        canon[0] -= m
        irregular += m - float(rem[0])
        th, var = _spectral_factor(canon)
        thetas.append(th)
        ksivar.append(max(var, 0.0))
    if irregular < -1e-8:
        raise DecompositionError(
            f"irregular variance {irregular:.3e} negative: decomposition not admissible"
        )
    ksivar.append(max(irregular, 0.0))
    return HtdResult(thetas, ksivar)


def _extra_only(num):
    m = _spec_min(num, np.array([1.0]))
    canon = num.copy()
    canon[0] -= m
    th, var = _spectral_factor(np.atleast_1d(canon))
    return HtdResult([th], [var, max(m, 0.0) if m >= -1e-8 else _raise_neg(m)])


def _raise_neg(m):
    raise DecompositionError(f"irregular variance {m:.3e} negative")


# --------------------------------------------------------------------------


_ARIMA_TYPES = ("arma", "arima", "sarima", "sumarma", "airline")


def _arima_meta(model: StateSpaceModel):
    for comp in model.components:
        if comp.meta.get("type") in _ARIMA_TYPES:
            return comp.meta
    raise ValueError("model is not an ARIMA-type catalog model")


def ssmhtd(model: StateSpaceModel) -> StateSpaceModel:
    """Decompose a fitted ARIMA-type model into an ARIMA components model.

    Unit roots and stationary AR roots are assigned to trend (zero
    frequency), seasonal (harmonic frequencies of the period), or a
    transitory component; the resulting components model is ready for state
    smoothing and signal extraction.
    """
    meta = _arima_meta(model)
    p, q, P, Q = meta["p"], meta["q"], meta.get("P", 0), meta.get("Q", 0)
    s = meta.get("s", 1)
    d = meta.get("d_reg", 0)
    D = meta.get("D_seas", 0)
    if meta["type"] == "airline":
        d, D = 1, 1
    v = model.param_values
    at = 0
    phi = v[at : at + p]; at += p
    theta = v[at : at + q]; at += q
    Phi = v[at : at + P]; at += P
    Theta = v[at : at + Q]; at += Q
    etavar = float(v[at])

    arfull = np.concatenate([[1.0], -combined_lag_poly(phi, Phi, s, -1.0)]) \
        if (p or P) else np.array([1.0])
    mafull = np.concatenate([[1.0], combined_lag_poly(theta, Theta, s, 1.0)]) \
        if (q or Q) else np.array([1.0])

    # unit roots from differencing, stationary AR roots assigned by frequency
    pmul = np.polynomial.polynomial.polymul
    pfromroots = np.polynomial.polynomial.polyfromroots

    def from_b_roots(roots):
        """Real lag polynomial with the given B-plane roots, constant 1."""
        c = np.real(pfromroots(roots))
        return c / c[0]

    trend_roots, seas_roots, trans_roots = [], [], []
    if arfull.size > 1:
        roots = np.roots(arfull[::-1])  # B-plane roots, outside the unit circle
        freqs = np.array([2 * np.pi * j / s for j in range(1, s // 2 + 1)]) \
            if s > 1 else np.zeros(0)
        for r in roots:
            ang = abs(np.angle(r))
            if ang < 1e-6 and r.real > 0:
                trend_roots.append(r)
            elif freqs.size and np.min(np.abs(freqs - ang)) < 1e-6:
                seas_roots.append(r)
            else:
                trans_roots.append(r)
    trend_poly = polypow([1.0, -1.0], d + D)
    if trend_roots:
        trend_poly = np.real(pmul(trend_poly, from_b_roots(trend_roots)))
    seas_poly = polypow(seasonal_sum_poly(s), D + meta.get("D_sum", 0))
    if seas_roots:
        seas_poly = np.real(pmul(seas_poly, from_b_roots(seas_roots)))

    Phi_list = []
    if trend_poly.size > 1:
        Phi_list.append(trend_poly)
    if seas_poly.size > 1:
        Phi_list.append(seas_poly)
    if trans_roots:
        Phi_list.append(from_b_roots(trans_roots))

    res = htd(d, D + meta.get("D_sum", 0), s, Phi_list, mafull, etavar)
    return predefined("arimacom", d, D + meta.get("D_sum", 0), s, Phi_list,
                      res.theta, res.ksivar)


# --------------------------------------------------------------------------
# TRAMO-style selection


def _ols_ar(x, lags):
    """OLS regression of x_t on the given lags; returns coefficients."""
    kmax = max(lags)
    n = x.size
    if n <= kmax + 2:
        return np.zeros(len(lags))
    Y = x[kmax:]
    X = np.column_stack([x[kmax - lag : n - lag] for lag in lags])
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return coef


def diffdegree(y, s: int = None, ub=(0.97, 0.88), tsig: float = 1.5):
    """Unit-root detection by iterated AR-root thresholding.

    Differences while the regular (seasonal) AR root estimate reaches
    ``ub[0]`` (``ub[1]``); at most 2 regular and 1 seasonal difference.
    Returns (d, mean) or (d, D, mean) with the mean flag from a t-test on
    the final differenced series.
    """
    x = np.asarray(y, dtype=float).ravel()
    x = x[~np.isnan(x)]
    d = reg = 0
    D = 0
    while True:
        if x.size < 8 or np.var(x) < 1e-12 * max(1.0, np.mean(np.abs(x)) ** 2):
            break
        xc = x - x.mean()
        lags = [1, s] if s else [1]
        coef = _ols_ar(xc, lags)
        phi = coef[0]
        Phi = coef[1] if s else 0.0
        if d < 2 and phi >= ub[0]:
            x = np.diff(x)
            d += 1
            continue
        if s and D < 1 and Phi >= ub[1]:
            x = x[s:] - x[:-s]
            D += 1
            continue
        if phi >= ub[0] or (s and Phi >= ub[1]):
            log.warning("diffdegree: differencing capped at d=%d, D=%d", d, D)
        break
    sd = x.std(ddof=1) if x.size > 1 else 0.0
    if sd <= 0:
        tmean = np.inf if abs(x.mean()) > 0 else 0.0
    else:
        tmean = abs(x.mean()) / (sd / np.sqrt(x.size))
    mean = bool(tmean >= tsig)
    if s:
        return d, D, mean
    return d, mean


def armadegree(y, s: int = None, mean: bool = False, mr: int = 3, ms: int = 1,
               opts=None, return_grid: bool = False, **overrides):
    """ARMA (or SARMA) degree selection by BIC over a full grid.

    Every (p, q) cell (and (P, Q) when ``s`` is given) is estimated by
    maximum likelihood; failed cells are skipped with a warning.  Ties break
    toward smaller p+q, then smaller q.
    """
    opt = resolve_options(opts, **overrides)
    x = np.asarray(y, dtype=float).ravel()
    shape = (mr + 1, mr + 1) if not s else (mr + 1, mr + 1, ms + 1, ms + 1)
    bic = np.full(shape, np.nan)
    for idx in np.ndindex(*shape):
        if not s:
            p, q = idx
            mdl = predefined("arma", p, q, mean)
        else:
            p, q, P, Q = idx
            mdl = predefined("sarima", p, 0, q, P, 0, Q, s, mean)
        try:
            if mdl.w:
                _, rep = fit(x[None, :], mdl, 0.1, opts=opt)
                bic[idx] = rep.BIC
            else:
                from .kalman import loglik

                ll = loglik(x[None, :], mdl, opt)
                bic[idx] = -2.0 * ll / x.size
        except Exception as exc:  # noqa: BLE001 - cell-level failure tolerated
            log.warning("armadegree: cell %s failed: %s", idx, exc)
    if np.all(np.isnan(bic)):
        raise RuntimeError("every grid cell failed to estimate")

    def keyfun(idx):
        total = sum(idx)
        q = idx[1]
        return (round(float(bic[idx]), 12), total, q)

    candidates = [idx for idx in np.ndindex(*shape) if np.isfinite(bic[idx])]
    best = min(candidates, key=keyfun)
    if return_grid:
        return best, bic
    return best


def arimaselect(y, s: int = None, opts=None, **overrides) -> ArimaSpec:
    """TRAMO-style automatic model selection: differencing orders and mean
    by unit-root detection, then ARMA degrees by the BIC grid."""
    x = np.asarray(y, dtype=float).ravel()
    x = x[~np.isnan(x)]
    if x.size < 20:
        raise ValueError("need at least 20 observations for selection")
    if s:
        d, D, mean = diffdegree(x, s)
        z = x.copy()
        for _ in range(d):
            z = np.diff(z)
        for _ in range(D):
            z = z[s:] - z[:-s]
        p, q, P, Q = armadegree(z, s, mean=mean, opts=opts, **overrides)
        return ArimaSpec(p, d, q, P, D, Q, s, mean)
    d, mean = diffdegree(x)
    z = x.copy()
    for _ in range(d):
        z = np.diff(z)
    p, q = armadegree(z, mean=mean, opts=opts, **overrides)
    return ArimaSpec(p, d, q, mean=mean)


def loglevel(y, s: int = None, order=None, sorder=None, opts=None, **overrides) -> int:
    """Decide between modeling y or log y.

    Fits the designated family (airline with period ``s``; ARMA with
    ``order=(p, q)``; SARIMA with ``order=(p, d, q)`` and optional
    ``sorder=(P, D, Q, s)``) to both scales and compares per-observation BIC
    with the log-scale Jacobian folded in.  Returns 1 for levels, 0 for logs.
    """
    x = np.asarray(y, dtype=float).ravel()
    ok = ~np.isnan(x)
    if np.any(x[ok] <= 0):
        raise ValueError("log-scale comparison needs positive observations")

    def family():
        if order is None:
            return predefined("airline", s or 12)
        if len(order) == 2 and sorder is None:
            return predefined("arma", order[0], order[1])
        if len(order) == 3:
            if sorder is None:
                return predefined("arima", *order)
            return predefined("sarima", *order, *sorder)
        raise ValueError("unsupported family specification")

    _, rep_lvl = fit(x[None, :], family(), 0.1, opts=opts, **overrides)
    _, rep_log = fit(np.log(x)[None, :], family(), 0.1, opts=opts, **overrides)
    n = ok.sum()
    crit_log = rep_log.BIC + 2.0 * np.sum(np.log(x[ok])) / x.size
    return 1 if rep_lvl.BIC <= crit_log else 0


def randarma(n: int, r, seed: int = 0) -> np.ndarray:
    """Random degree-n lag polynomial with root magnitudes in [lo, hi].

    Complex roots come in conjugate pairs; the returned coefficient vector
    [1, c1, ..., cn] re-roots (numpy convention) to magnitudes inside the
    unit disk, i.e. the lag polynomial is stationary/invertible.
    """
    lo, hi = r
    if not (0 < lo <= hi < 1):
        raise ValueError("root magnitude range must satisfy 0 < lo <= hi < 1")
    rng = np.random.default_rng(seed)
    roots = []
    left = n
    while left > 0:
        mag = rng.uniform(lo, hi)
        if left >= 2 and rng.random() < 0.5:
            ang = rng.uniform(0.05, np.pi - 0.05)
            z = mag * np.exp(1j * ang)
            roots += [z, np.conj(z)]
            left -= 2
        else:
            roots.append(mag * (1.0 if rng.random() < 0.5 else -1.0))
            left -= 1
    return np.real(np.poly(np.array(roots)))


def oosforecast(y, model: StateSpaceModel, n1: int, h, opts=None, **overrides):
    """Rolling out-of-sample forecasts at fixed parameters.

    For each cut point from n-n1 to n-max(h), the filter runs on the
    truncated series and forecasts max(h) steps.  Returns (yf, err, SS)
    shaped (len(h), cuts): forecasts, errors, and cumulative squared error.
    """
    data = as_data(y)
    n = data.n
    hs = [int(v) for v in np.atleast_1d(h)]
    if min(hs) < 1:
        raise ValueError("forecast steps must be >= 1")
    if not (0 < n1 < n):
        raise ValueError("n1 must lie strictly between 0 and n")
    hmax = max(hs)
    cuts = list(range(n - n1, n - hmax + 1))
    if not cuts:
        raise ValueError("no usable cut points: n1 smaller than max horizon")
    yf = np.full((len(hs), len(cuts)), np.nan)
    err = np.full((len(hs), len(cuts)), np.nan)
    for ci, t0 in enumerate(cuts):
        pts, _ = _forecast(data.values[:, :t0], model, hmax, opts, **overrides)
        for hi, hstep in enumerate(hs):
            yf[hi, ci] = pts[0, hstep - 1]
            actual = data.values[0, t0 + hstep - 1]
            err[hi, ci] = yf[hi, ci] - actual
    SS = np.nancumsum(err**2, axis=1)
    return yf, err, SS
