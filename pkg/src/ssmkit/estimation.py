"""Maximum-likelihood estimation over transformed parameters.

The objective is the exact-diffuse Gaussian loglikelihood; non-Gaussian
models are re-approximated at every evaluation and their reported likelihood
gains the importance-sampling correction at the optimum.  Optimization runs
in the unconstrained parameter space, so the model is never evaluated at an
out-of-domain point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import as_data
from .kalman import FilterSingularError, loglik
from .model import StateSpaceModel
from .nongauss import ApproximationError, gauss_approximate, logprobrat
from .options import Options, resolve_options
from .params import DomainError

__all__ = ["FitReport", "OptimizerTrace", "fit", "optimizer_simplex", "optimizer_bfgs"]

_BIG = 1e12


@dataclass
class OptimizerTrace:
    """Per-run optimizer diagnostics; ``history`` holds best-so-far values."""

    n_evals: int = 0
    iterations: int = 0
    converged: bool = False
    history: list = field(default_factory=list)
    message: str = ""


@dataclass
class FitReport:
    logL: float
    AIC: float
    BIC: float
    iterations: int
    converged: bool
    param_names: tuple
    params: np.ndarray
    ytilde: np.ndarray = None
    trace: OptimizerTrace = None
    correction: float = 0.0


def _counting(objective, trace):
    def wrapped(x):
        trace.n_evals += 1
        return float(objective(x))

    return wrapped


def optimizer_simplex(objective, psi0, opts=None, **overrides):
    """Nelder-Mead with the standard coefficients (1, 2, 0.5, 0.5).

    Stops when the simplex size and objective spread fall below ``tol``
    (size-based stopping); deterministic given inputs.
    """
    opt = resolve_options(opts, **overrides)
    trace = OptimizerTrace()
    f = _counting(objective, trace)
    x0 = np.asarray(psi0, dtype=float).ravel()
    k = x0.size
    if k == 0:
        trace.converged = True
        return x0, trace

    verts = [x0.copy()]
    for i in range(k):
        v = x0.copy()
        v[i] += 0.25 * (1.0 + 0.1 * abs(v[i]))
        verts.append(v)
    verts = np.array(verts)
    fv = np.array([f(v) for v in verts])

    alpha, gamma, beta, delta = 1.0, 2.0, 0.5, 0.5
    for it in range(opt.maxiter):
        order = np.argsort(fv, kind="stable")
        verts, fv = verts[order], fv[order]
        trace.iterations = it + 1
        trace.history.append(fv[0])
        size = np.max(np.abs(verts[1:] - verts[0]))
        spread = fv[-1] - fv[0]
        if size <= opt.tol * (1.0 + np.max(np.abs(verts[0]))) and \
                spread <= opt.tol * (1.0 + abs(fv[0])):
            trace.converged = True
            break
        cen = verts[:-1].mean(axis=0)
        xr = cen + alpha * (cen - verts[-1])
        fr = f(xr)
        if fr < fv[0]:
            xe = cen + gamma * (xr - cen)
            fe = f(xe)
            if fe < fr:
                verts[-1], fv[-1] = xe, fe
            else:
                verts[-1], fv[-1] = xr, fr
        elif fr < fv[-2]:
            verts[-1], fv[-1] = xr, fr
        else:
            xc = cen + beta * (verts[-1] - cen)
            fc = f(xc)
            if fc < fv[-1]:
                verts[-1], fv[-1] = xc, fc
            else:
                for i in range(1, k + 1):
                    verts[i] = verts[0] + delta * (verts[i] - verts[0])
                    fv[i] = f(verts[i])
    else:
        trace.message = "maximum iterations reached"
    best = int(np.argmin(fv))
    return verts[best].copy(), trace


def _fd_gradient(f, x, fx):
    g = np.zeros_like(x)
    for i in range(x.size):
        h = 1e-6 * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def optimizer_bfgs(objective, psi0, opts=None, **overrides):
    """Quasi-Newton with central finite-difference gradients and a
    backtracking (Armijo) line search; deterministic given inputs."""
    opt = resolve_options(opts, **overrides)
    trace = OptimizerTrace()
    f = _counting(objective, trace)
    x = np.asarray(psi0, dtype=float).ravel().copy()
    k = x.size
    if k == 0:
        trace.converged = True
        return x, trace
    fx = f(x)
    Hinv = np.eye(k)
    g = _fd_gradient(f, x, fx)
    small_steps = 0
    for it in range(opt.maxiter):
        trace.iterations = it + 1
        trace.history.append(fx)
        if np.max(np.abs(g)) <= 1e-6 * (1.0 + abs(fx)):
            trace.converged = True
            break
        p = -Hinv @ g
        slope = g @ p
        if slope >= 0:
            Hinv = np.eye(k)
            p = -g
            slope = g @ p
        step = 1.0
        fnew = None
        for _ in range(40):
            xn = x + step * p
            fn = f(xn)
            if np.isfinite(fn) and fn <= fx + 1e-4 * step * slope:
                fnew = fn
                break
            step *= 0.5
        if fnew is None:
            trace.message = "line search failed"
            break
        s = xn - x
        yk = _fd_gradient(f, xn, fn) - g
        gnew = yk + g
        sy = s @ yk
        if sy > 1e-10 * np.linalg.norm(s) * max(np.linalg.norm(yk), 1e-300):
            rho = 1.0 / sy
            I = np.eye(k)
            Hinv = (I - rho * np.outer(s, yk)) @ Hinv @ (I - rho * np.outer(yk, s)) \
                + rho * np.outer(s, s)
        df = fx - fnew
        x, fx, g = xn, fnew, gnew
        if df <= opt.tol * (1.0 + abs(fx)):
            small_steps += 1
            if small_steps >= 2:
                trace.converged = True
                break
        else:
            small_steps = 0
    else:
        trace.message = "maximum iterations reached"
    return x, trace


def _resolve_param0(model, param0):
    """Initial values and free mask from the accepted param0 forms."""
    w = model.w
    values = model.param_values
    free = np.ones(w, dtype=bool)
    if param0 is None:
        return values, free
    p0 = np.asarray(param0)
    if p0.ndim == 0:
        return np.full(w, float(p0)), free
    if p0.ndim == 1 and p0.dtype == bool:
        if p0.size != w:
            raise ValueError(f"mask has length {p0.size}, expected {w}")
        return values, p0.copy()
    if p0.ndim == 1:
        if p0.size != w:
            raise ValueError(f"param0 has length {p0.size}, expected {w}")
        return p0.astype(float), free
    if p0.ndim == 2 and p0.shape == (2, w):
        return p0[0].astype(float), p0[1].astype(bool)
    raise ValueError("param0 must be a scalar, vector, mask, or 2 x w matrix")


def fit(y, model: StateSpaceModel, param0=None, alpha0=None, opts=None,
        **overrides):
    """Estimate free parameters by maximum likelihood.

    ``param0``: None (current values), scalar (broadcast), full vector,
    boolean mask (estimate the flagged subset from current values), or a
    2 x w matrix of (initial values, mask).  Returns (model, FitReport)
    with AIC = (-2 logL + 2w)/n and BIC = (-2 logL + w log n)/n.
    """
    opt = resolve_options(opts, **overrides)
    data = as_data(y)
    n = data.n
    values0, free = _resolve_param0(model, param0)
    model0 = model.with_params(values0) if model.w else model
    gaussian = model0.gaussian
    w_free = int(free.sum())

    def full_psi(psi_free, base_psi):
        out = base_psi.copy()
        out[free] = psi_free
        return out

    base_psi = model0.psi

    def objective(psi_free):
        try:
            mdl = model0.with_psi(full_psi(psi_free, base_psi))
            if gaussian:
                return -loglik(data, mdl, opt)
            work, ytil = gauss_approximate(data, mdl, alpha0, opt)
            return -loglik(ytil, work, opt)
        except (FilterSingularError, ApproximationError, DomainError,
                np.linalg.LinAlgError, FloatingPointError):
            return _BIG

    if w_free == 0:
        mdl = model0
        corr = 0.0
        if gaussian:
            logL = loglik(data, mdl, opt)
            ytil = None
        else:
            work, ytil = gauss_approximate(data, mdl, alpha0, opt)
            logL = loglik(ytil, work, opt)
            corr = _final_correction(data, work, ytil, opt)
            logL += corr
        rep = FitReport(logL, (-2 * logL) / n, (-2 * logL) / n, 0, True,
                        mdl.params.names, mdl.param_values, ytil,
                        OptimizerTrace(converged=True), corr)
        return mdl, rep

    f0 = objective(base_psi[free])
    if not np.isfinite(f0) or f0 >= _BIG:
        raise ValueError("objective is not finite at the initial parameters")

    optimizer = optimizer_bfgs if opt.fmin == "bfgs" else optimizer_simplex
    if opt.disp == "iter":
        shown = [0]

        def chatty(psi_free):
            val = objective(psi_free)
            shown[0] += 1
            print(f"eval {shown[0]:5d}  obj {val:.6f}")
            return val

        psi_best, trace = optimizer(chatty, base_psi[free], opt)
    else:
        psi_best, trace = optimizer(objective, base_psi[free], opt)

    mdl = model0.with_psi(full_psi(psi_best, base_psi))
    corr = 0.0
    if gaussian:
        logL = loglik(data, mdl, opt)
        ytil = None
    else:
        work, ytil = gauss_approximate(data, mdl, alpha0, opt)
        logL = loglik(ytil, work, opt)
        corr = _final_correction(data, work, ytil, opt)
        logL += corr
        mdl = work
    aic = (-2.0 * logL + 2.0 * w_free) / n
    bic = (-2.0 * logL + w_free * np.log(n)) / n
    if opt.disp == "final" or (opt.disp == "notify" and not trace.converged):
        state = "converged" if trace.converged else "NOT converged"
        print(f"fit {state}: logL={logL:.4f} after {trace.iterations} iterations "
              f"({trace.n_evals} evaluations)")
    rep = FitReport(logL, aic, bic, trace.iterations, trace.converged,
                    mdl.params.names, mdl.param_values, ytil, trace, corr)
    return mdl, rep


def _final_correction(data, work, ytil, opt: Options) -> float:
    """Importance-sampling correction at the optimum (nsamp > 0)."""
    if opt.nsamp <= 0:
        return 0.0
    from .smoothing import sim_smooth

    alpha, eps, eta = sim_smooth(ytil, work, N=opt.nsamp, antithetic=True, seed=0,
                                 opts=opt)
    Z = work.Z.realize(data.n)
    if Z.shape[0] > 1:
        theta = np.einsum("tpm,mtn->ptn", Z, alpha)
    else:
        theta = np.einsum("pm,mtn->ptn", Z[0], alpha)
    return logprobrat(work, opt.nsamp, y=data.values, theta=theta, eps=eps,
                      eta=eta, ytilde=ytil)
