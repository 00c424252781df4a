"""Non-Gaussian disturbances: distribution catalog, Gaussian approximation,
importance-sampling likelihood correction.

The approximation is a mode-matching linearization: at the current smoothed
signal, each non-Gaussian log density is replaced by a Gaussian with the same
gradient and curvature.  For an exponential-family observation density
exp(y'theta - b(theta) + c(y)) this gives a working variance inv(d2b) and
transformed observations ytilde = theta + y/d2b(theta) - id2bdb(theta);
for additive noise the working variance comes from the distribution's own
reweighting rule.  Iterating smoothing and relinearization to a fixed point
yields the approximating Gaussian model, whose likelihood is then corrected
by the log of the averaged density ratio over simulation-smoother draws.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy.special import gammaln

from .data import as_data
from .dynmat import DynamicMatrix
from .model import Disturbance, NonGaussianSpec, StateSpaceModel
from .options import resolve_options
from .params import ParamSet

__all__ = [
    "make_distribution",
    "distribution_paramset",
    "gauss_approximate",
    "logprobrat",
    "ApproximationError",
]

_LOG2PI = float(np.log(2.0 * np.pi))


class ApproximationError(RuntimeError):
    """Gaussian-approximation loop failed to converge; carries last iterate."""

    def __init__(self, msg, theta=None):
        super().__init__(msg)
        self.theta = theta


def _softplus(x):
    return np.logaddexp(0.0, x)


def _expfam(label, b, d2b, id2bdb, c, rows=1):
    funcs = {"b": b, "d2b": d2b, "id2bdb": id2bdb, "c": c}

    def logp(y, theta):
        return y * theta - b(theta) + c(y)

    return NonGaussianSpec("exp_family", np.ones(rows, dtype=bool),
                           logp=logp, funcs=funcs, label=label)


def make_distribution(code: str, *args, params=None, **kwargs) -> NonGaussianSpec:
    """Predefined non-Gaussian distribution by code.

    poisson | binary | binomial(k) | negbinomial(k) | exp |
    multinomial(h, k) | expfamily(b, d2b, id2bdb, c) | t(nu=None).
    ``k`` may be a scalar or a per-time row vector.  ``params`` supplies
    current parameter values for the variable ones (t).
    """
    code = code.lower()
    if code == "poisson":
        return _expfam(
            "poisson",
            b=np.exp,
            d2b=np.exp,
            id2bdb=lambda theta: np.ones_like(theta),
            c=lambda y: -gammaln(y + 1.0),
        )
    if code == "binary":
        return _expfam(
            "binary",
            b=_softplus,
            d2b=lambda t: np.exp(t - 2.0 * _softplus(t)),
            id2bdb=lambda t: 1.0 + np.exp(t),
            c=lambda y: np.zeros_like(y),
        )
    if code == "binomial":
        (k,) = args
        k = np.asarray(k, dtype=float)
        if np.any(k <= 0):
            raise ValueError("binomial trial count k must be positive")
        return _expfam(
            "binomial",
            b=lambda t: k * _softplus(t),
            d2b=lambda t: k * np.exp(t - 2.0 * _softplus(t)),
            id2bdb=lambda t: 1.0 + np.exp(t),
            c=lambda y: gammaln(k + 1.0) - gammaln(y + 1.0) - gammaln(k - y + 1.0),
        )
    if code == "negbinomial":
        (k,) = args
        k = np.asarray(k, dtype=float)
        if np.any(k <= 0):
            raise ValueError("negative binomial trial count k must be positive")

        def d2b(t):
            e = np.exp(t)
            return k * e / (1.0 - e) ** 2

        return _expfam(
            "negbinomial",
            b=lambda t: -k * np.log(1.0 - np.exp(t)),
            d2b=d2b,
            id2bdb=lambda t: 1.0 - np.exp(t),
            c=lambda y: gammaln(k + y) - gammaln(k) - gammaln(y + 1.0),
        )
    if code == "exp":
        return _expfam(
            "exp",
            b=lambda t: -np.log(-t),
            d2b=lambda t: 1.0 / t**2,
            id2bdb=lambda t: -t,
            c=lambda y: np.zeros_like(y),
        )
    if code == "multinomial":
        h, k = args
        h = int(h)
        if h < 2:
            raise ValueError("multinomial needs at least 2 cells")
        k = np.asarray(k, dtype=float)
        if np.any(k <= 0):
            raise ValueError("multinomial trial count k must be positive")

        def b(theta):
            return k * np.logaddexp(0.0, _logsumexp_cols(theta))

        def d2b(theta):
            pi = _mn_probs(theta)
            out = -np.einsum("it,jt->ijt", pi, pi)
            di = np.arange(h - 1)
            out[di, di, :] += pi
            return k * out

        def id2bdb(theta):
            # solve d2b x = db: db = k * pi
            pi = _mn_probs(theta)
            D = d2b(theta)
            out = np.empty_like(pi)
            for t in range(pi.shape[1]):
                out[:, t] = np.linalg.solve(D[:, :, t], k * pi[:, t] if k.ndim == 0
                                            else k.ravel()[min(t, k.size - 1)] * pi[:, t])
            return out

        def c(y):
            tot = y.sum(axis=0)
            return (gammaln(k + 1.0) - gammaln(y + 1.0).sum(axis=0)
                    - gammaln(k - tot + 1.0))

        def logp(y, theta):
            return (y * theta).sum(axis=0) - b(theta) + c(y)

        return NonGaussianSpec("exp_family", np.ones(h - 1, dtype=bool), logp=logp,
                               funcs={"b": b, "d2b": d2b, "id2bdb": id2bdb, "c": c},
                               label="multinomial")
    if code == "expfamily":
        b, d2b, id2bdb, c = args
        return _expfam("expfamily", b=b, d2b=d2b, id2bdb=id2bdb, c=c)
    if code == "t":
        nu_fixed = args[0] if args else kwargs.get("nu")
        if params is not None:
            var = float(np.atleast_1d(params)[0])
            nu = float(np.atleast_1d(params)[1]) if nu_fixed is None else float(nu_fixed)
        else:
            var = 1.0
            nu = 10.0 if nu_fixed is None else float(nu_fixed)
        if nu <= 2:
            raise ValueError("t degrees of freedom must exceed 2 (finite variance)")

        def logp(eps, var=var, nu=nu):
            z2 = eps**2 / (nu * var)
            return (gammaln((nu + 1) / 2) - gammaln(nu / 2)
                    - 0.5 * np.log(nu * np.pi * var) - (nu + 1) / 2 * np.log1p(z2))

        def approx_var(eps, var=var, nu=nu):
            # score-matching reweighting: same gradient as the t density
            return (nu * var + eps**2) / (nu + 1.0)

        return NonGaussianSpec("additive_noise", np.ones(1, dtype=bool),
                               approx_var=approx_var, logp=logp,
                               funcs={"var": var, "nu": nu},
                               variable=True, label="t")
    raise ValueError(f"unknown distribution code {code!r}")


def distribution_paramset(code: str, *args, **kwargs) -> ParamSet:
    """Parameter set for the variable predefined distributions."""
    if code == "t":
        nu = args[0] if args else kwargs.get("nu")
        if nu is None:
            return ParamSet(("t var", "t df"), np.array([1.0, 10.0]),
                            ((1, "1/2 log"), (1, "df")))
        return ParamSet(("t var",), np.array([1.0]), ((1, "1/2 log"),))
    return ParamSet.empty()


def _logsumexp_cols(theta):
    mx = theta.max(axis=0)
    return mx + np.log(np.exp(theta - mx).sum(axis=0))


def _mn_probs(theta):
    denom = np.logaddexp(0.0, _logsumexp_cols(theta))
    return np.exp(theta - denom)


# --------------------------------------------------------------------------


def _spec_blocks(dist: Disturbance):
    return [(spec, np.flatnonzero(spec.rows)) for spec in dist.specs]


def _linearize_obs(spec, rows, y, theta, obs):
    """Working variances (cells) and ytilde rows for one observation spec."""
    k = rows.size
    n = y.shape[1]
    th = theta[rows]
    if spec.kind == "exp_family":
        ok = obs[rows].all(axis=0)
        if k == 1:
            d2b = spec.funcs["d2b"](th[0])
            if np.any(d2b[ok] <= 0):
                raise ApproximationError("d2b non-positive in the working domain", th)
            hcells = np.empty((1, n))
            hcells[0] = np.where(ok, 1.0 / np.maximum(d2b, 1e-300), 1.0)
            yt = np.full((1, n), np.nan)
            yt[0, ok] = th[0, ok] + y[rows[0], ok] / d2b[ok] - spec.funcs["id2bdb"](th[0])[ok]
            return hcells, yt
        D = spec.funcs["d2b"](th)
        hcells = np.ones((k * k, n))
        yt = np.full((k, n), np.nan)
        idb = spec.funcs["id2bdb"](th)
        for t in range(n):
            if not ok[t]:
                hcells[:, t] = np.eye(k).ravel(order="F")
                continue
            Ht = np.linalg.inv(D[:, :, t])
            hcells[:, t] = Ht.ravel(order="F")
            yt[:, t] = th[:, t] + Ht @ y[rows, t] - idb[:, t]
        return hcells, yt
    # additive noise: variance from the current residuals, data unchanged
    eps = np.where(obs[rows], y[rows] - th, 0.0)
    hv = spec.approx_var(eps)
    return np.atleast_2d(hv), None


def _working_H(model, hcell_blocks, n):
    """Assemble the observation variance with approximating cells baked in."""
    p = model.p
    base = model.H.mat.mat.copy()
    dmmask = np.zeros((p, p), dtype=bool)
    for spec, rows in _spec_blocks(model.H):
        if spec.kind == "exp_family" and rows.size > 1:
            dmmask[np.ix_(rows, rows)] = True
        else:
            dmmask[rows, rows] = True
    cols, rws = np.nonzero(dmmask.T)
    rank = {(r, c): i for i, (c, r) in enumerate(zip(cols, rws))}
    dvec = np.zeros((int(dmmask.sum()), n))
    for (spec, rows), cells in zip(_spec_blocks(model.H), hcell_blocks):
        if spec.kind == "exp_family" and rows.size > 1:
            idx = 0
            for cc in rows:
                for rr in rows:
                    dvec[rank[(rr, cc)]] = cells[idx]
                    idx += 1
        else:
            for j, rr in enumerate(rows):
                dvec[rank[(rr, rr)]] = cells[j]
    return DynamicMatrix(base, None, dmmask, dvec)


def _working_Q(model, qcell_blocks, n):
    r = model.r
    base = model.Q.mat.mat.copy()
    dmmask = np.zeros((r, r), dtype=bool)
    for spec, rows in _spec_blocks(model.Q):
        dmmask[rows, rows] = True
    cols, rws = np.nonzero(dmmask.T)
    rank = {(rr, cc): i for i, (cc, rr) in enumerate(zip(cols, rws))}
    dvec = np.zeros((int(dmmask.sum()), n))
    for (spec, rows), cells in zip(_spec_blocks(model.Q), qcell_blocks):
        for j, rr in enumerate(rows):
            dvec[rank[(rr, rr)]] = cells[j]
    return DynamicMatrix(base, None, dmmask, dvec)


def gauss_approximate(y, model: StateSpaceModel, alpha0=None, opts=None,
                      tol: float = 1e-7, maxiter: int = 100, **overrides):
    """Iterated mode-matching Gaussian approximation.

    Returns (approximating model, ytilde).  The model keeps its non-Gaussian
    specs (for the likelihood correction) but carries the converged working
    variances, so Gaussian algorithms accept it; exponential-family rows of
    ``ytilde`` hold the transformed observations, other rows the original
    data.  Gaussian input models are returned unchanged.
    """
    from .smoothing import smooth_all

    opt = resolve_options(opts, **overrides)
    data = as_data(y)
    if data.p != model.p:
        raise ValueError(f"data has {data.p} rows, model expects {model.p}")
    if model.gaussian:
        return model, data.values.copy()
    n = data.n
    yv = np.where(data.observed, data.values, 0.0)
    obs = data.observed

    if alpha0 is None:
        alpha = np.zeros((model.m, n))
    else:
        alpha = np.asarray(alpha0, dtype=float).reshape(model.m, n)
    Z = model.Z.realize(n)
    theta = np.einsum("tpm,mt->pt", Z, alpha) if Z.shape[0] > 1 else Z[0] @ alpha

    hspecs = _spec_blocks(model.H)
    qspecs = _spec_blocks(model.Q)
    etahat = np.zeros((model.r, n))
    prev_delta = np.inf
    theta_cur = theta

    def build_working(theta_at, eta_at):
        hblocks = []
        ymiss = data.values.copy()
        for spec, rows in hspecs:
            cells, yt = _linearize_obs(spec, rows, yv, theta_at, obs)
            hblocks.append(cells)
            if yt is not None:
                ymiss[rows] = np.where(obs[rows], yt, np.nan)
        qblocks = [np.atleast_2d(spec.approx_var(eta_at[rows]))
                   for spec, rows in qspecs]
        work = replace(
            model,
            H=Disturbance(_working_H(model, hblocks, n), model.H.specs),
            Q=Disturbance(_working_Q(model, qblocks, n), model.Q.specs) if qspecs
            else model.Q,
            approximated=True,
        )
        return work, ymiss

    converged = False
    for it in range(maxiter):
        work, ymiss = build_working(theta_cur, etahat)
        res = smooth_all(ymiss, work, opt, variances=False)
        etahat = res.etahat
        alpha = res.alphahat
        theta_new = np.einsum("tpm,mt->pt", Z, alpha) if Z.shape[0] > 1 else Z[0] @ alpha
        delta = float(np.max(np.abs(theta_new - theta_cur))) if theta_new.size else 0.0
        if delta <= tol:
            theta_cur = theta_new
            converged = True
            break
        if delta > prev_delta:
            # dampen when the fixed-point step overshoots
            theta_cur = theta_cur + 0.5 * (theta_new - theta_cur)
        else:
            theta_cur = theta_new
        prev_delta = delta
    if not converged:
        raise ApproximationError(
            f"Gaussian approximation did not converge in {maxiter} iterations "
            f"(last step {delta:.3g})", theta_cur,
        )
    work, ymiss = build_working(theta_cur, etahat)
    return work, ymiss


def logprobrat(model: StateSpaceModel, N: int, y=None, theta=None, eps=None,
               eta=None, ytilde=None) -> float:
    """Log of the averaged non-Gaussian/Gaussian density ratio.

    ``theta`` holds signal draws (p, n, N) from the approximating model's
    simulation smoother (exponential-family specs), ``eps``/``eta``
    disturbance draws (additive-noise specs on H/Q).  Gaussian models return
    exactly 0.  The average is computed with max-subtraction.
    """
    if N < 1:
        raise ValueError("need at least one importance draw")
    if model.gaussian:
        return 0.0
    logw = np.zeros(N)
    hspecs = _spec_blocks(model.H)
    qspecs = _spec_blocks(model.Q)
    n = None
    for src in (y, theta, eps, eta, ytilde):
        if src is not None:
            n = np.asarray(src).shape[1]
            break
    Ht = model.H.mat.realize(n) if hspecs else None
    Qt = model.Q.mat.realize(n) if qspecs else None

    for spec, rows in hspecs:
        if spec.kind == "exp_family":
            if theta is None or y is None or ytilde is None:
                raise ValueError("exponential-family correction needs y, ytilde and theta draws")
            yobs = np.asarray(y, dtype=float)[rows]
            ok = ~np.isnan(yobs).any(axis=0)
            th = np.asarray(theta)[rows]
            yt = np.asarray(ytilde)[rows]
            k = rows.size
            for t in np.flatnonzero(ok):
                Hblk = Ht[t if Ht.shape[0] > 1 else 0][np.ix_(rows, rows)]
                if k == 1:
                    hv = Hblk[0, 0]
                    resid = yt[0, t] - th[0, t, :]
                    logg = -0.5 * (_LOG2PI + np.log(hv) + resid**2 / hv)
                    logw += spec.logp(yobs[0, t], th[0, t, :]) - logg
                else:
                    sign, logdet = np.linalg.slogdet(Hblk)
                    Hinv = np.linalg.inv(Hblk)
                    resid = yt[:, t, None] - th[:, t, :]
                    quad = np.einsum("in,ij,jn->n", resid, Hinv, resid)
                    logg = -0.5 * (k * _LOG2PI + logdet + quad)
                    logw += spec.logp(yobs[:, t][:, None], th[:, t, :]) - logg
        else:
            if eps is None:
                raise ValueError("additive-noise correction needs eps draws")
            ev = np.asarray(eps)[rows]
            ok = np.ones(ev.shape[1], dtype=bool) if y is None else \
                ~np.isnan(np.asarray(y, dtype=float)[rows]).any(axis=0)
            for t in np.flatnonzero(ok):
                hv = Ht[t if Ht.shape[0] > 1 else 0][rows[0], rows[0]]
                draws = ev[0, t, :]
                logg = -0.5 * (_LOG2PI + np.log(hv) + draws**2 / hv)
                logw += spec.logp(draws) - logg

    for spec, rows in qspecs:
        if eta is None:
            raise ValueError("state-disturbance correction needs eta draws")
        ev = np.asarray(eta)[rows]
        for t in range(ev.shape[1]):
            for j, rr in enumerate(rows):
                qv = Qt[t if Qt.shape[0] > 1 else 0][rr, rr]
                draws = ev[j, t, :]
                logg = -0.5 * (_LOG2PI + np.log(qv) + draws**2 / qv)
                logw += spec.logp(draws) - logg

    if not np.all(np.isfinite(logw)):
        raise FloatingPointError("non-finite importance weights")
    mx = logw.max()
    return float(mx + np.log(np.mean(np.exp(logw - mx))))
