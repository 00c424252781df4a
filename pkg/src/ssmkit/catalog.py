"""Predefined model catalog: build standard models from a code string.

``predefined(code, ...)`` assembles noise models, structural components,
multivariate variants, ARIMA-type models and the cubic-spline model, wiring
base matrices, update functions and parameter transforms.  Components such
as ``seasonal`` or ``reg`` carry a null observation disturbance and are meant
to be combined; full models (``llm``, ``arma``, ``spline``, ...) embed their
own noise.

Observation-side conventions: variances are named "epsilon var" (noise),
"zeta var" (level; slope for trends), "xi var" (trend level), "omega var"
(seasonal); intervention onset times tau are 1-based, matching the usual
presentation of these models.
"""

from __future__ import annotations

import numpy as np

from .dynmat import DynamicMatrix
from .mathutil import dlyap
from .model import Component, Disturbance, StateSpaceModel, UpdateBinding, combine_additive
from .params import ParamSet
from .polyutil import combined_lag_poly, diff_poly, polypow, seasonal_sum_poly

__all__ = ["predefined", "intv_variable", "seasonal_block", "CatalogError",
           "OutOfScopeError"]


class CatalogError(ValueError):
    pass


class OutOfScopeError(CatalogError):
    """Documented model code that this toolkit deliberately does not build."""


_OUT_OF_SCOPE = {
    "genair": "generalized airline model",
    "sarimahtd": "SARIMA with built-in decomposition (use ssmhtd on a fitted model)",
    "1/f noise": "1/f noise model",
    "td6": "trading day regressors",
    "td1": "trading day regressors",
    "lom": "length-of-month regressor",
    "ly": "leap-year regressor",
    "ee": "Easter effect regressor",
    "zmsv": "zero-mean stochastic volatility distribution",
    "mix": "Gaussian mixture distribution",
    "error": "general error distribution",
}


# --------------------------------------------------------------------------
# small builders


def intv_variable(n: int, type: str, tau: int) -> np.ndarray:
    """Intervention regressor of length n; onset ``tau`` is 1-based.

    step: 0 before tau, 1 from tau on; pulse: 1 at tau only;
    slope: ramp 1,2,3,... from tau; null: all zero.
    """
    if type not in ("step", "pulse", "slope", "null"):
        raise CatalogError(f"unknown intervention type {type!r}")
    if type != "null" and not (1 <= tau <= n):
        raise CatalogError(f"intervention onset tau={tau} outside 1..{n}")
    x = np.zeros(n)
    if type == "step":
        x[tau - 1 :] = 1.0
    elif type == "pulse":
        x[tau - 1] = 1.0
    elif type == "slope":
        x[tau - 1 :] = np.arange(1, n - tau + 2)
    return x


def seasonal_block(type: str, s: int):
    """(Z, T, R) base matrices of a seasonal component.

    dummy: s-1 states, sum-to-zero recursion; trig*: rotation pairs at the
    harmonic frequencies (1x1 Nyquist block for even s); h&s: one state per
    season, rotated cyclically.  "fixed" variants carry no disturbance
    columns.
    """
    if s < 2:
        raise CatalogError("seasonal period must be >= 2")
    if type in ("dummy", "dummy fixed"):
        k = s - 1
        T = np.zeros((k, k))
        T[0, :] = -1.0
        T[1:, :-1] = np.eye(k - 1)
        Z = np.zeros((1, k))
        Z[0, 0] = 1.0
        R = np.zeros((k, 0)) if type == "dummy fixed" else np.eye(k)[:, :1]
        return Z, T, R
    if type in ("trig1", "trig2", "trig fixed"):
        k = s - 1
        T = np.zeros((k, k))
        Z = np.zeros((1, k))
        at = 0
        for j in range(1, s // 2 + 1):
            lam = 2.0 * np.pi * j / s
            if 2 * j == s:
                T[at, at] = np.cos(lam)
                Z[0, at] = 1.0
                at += 1
            else:
                cl, sl = np.cos(lam), np.sin(lam)
                T[at : at + 2, at : at + 2] = [[cl, sl], [-sl, cl]]
                Z[0, at] = 1.0
                at += 2
        R = np.zeros((k, 0)) if type == "trig fixed" else np.eye(k)
        return Z, T, R
    if type == "h&s":
        T = np.zeros((s, s))
        T[0, -1] = 1.0
        T[1:, :-1] = np.eye(s - 1)
        Z = np.zeros((1, s))
        Z[0, 0] = 1.0
        return Z, T, np.eye(s)
    raise CatalogError(f"unknown seasonal type {type!r}")


def _cov_names(base: str, p: int):
    if p == 1:
        return [f"{base} var"]
    names = [f"{base} var {i + 1}" for i in range(p)]
    for j in range(p):
        for i in range(j + 1, p):
            names.append(f"{base} cov {i + 1} {j + 1}")
    return names


def _cov_cells(S_packed: np.ndarray) -> np.ndarray:
    """Packed (variances, covariances) to full-matrix cells, column-major."""
    k = S_packed.size
    p = int((np.sqrt(8 * k + 1) - 1) / 2)
    S = np.zeros((p, p))
    S[np.diag_indices(p)] = S_packed[:p]
    pos = p
    for j in range(p):
        for i in range(j + 1, p):
            S[i, j] = S[j, i] = S_packed[pos]
            pos += 1
    return S.ravel(order="F")


def _var_paramset(base: str, p: int, cov: bool, values=None) -> ParamSet:
    if p == 1 or not cov:
        names = _cov_names(base, p)[:p]
        vals = np.ones(p) if values is None else values
        return ParamSet(tuple(names), vals, tuple((1, "1/2 log") for _ in names))
    k = p * (p + 1) // 2
    vals = np.concatenate([np.ones(p), np.zeros(k - p)]) if values is None else values
    return ParamSet(tuple(_cov_names(base, p)), vals, ((k, "cov"),))


def _fun_var(p: int, cov: bool, dups: int = 1):
    """Update writing a (possibly duplicated) variance matrix's cells.

    Returns vector for mmask covering: diagonal cells when not cov, the full
    p x p block when cov; repeated ``dups`` times along the diagonal.
    """
    if p == 1 or not cov:
        def fun(v):
            return np.tile(v, dups)
    else:
        def fun(v):
            return np.tile(_cov_cells(v), dups)
    return fun


def _var_mask(p: int, cov: bool, dups: int = 1) -> np.ndarray:
    """mmask for the matrix written by :func:`_fun_var` (block diagonal)."""
    block = np.ones((p, p), dtype=bool) if (cov and p > 1) else np.eye(p, dtype=bool)
    full = np.zeros((p * dups, p * dups), dtype=bool)
    for k in range(dups):
        full[k * p : (k + 1) * p, k * p : (k + 1) * p] = block
    return full


def _noise_model(p: int, cov: bool, name="Gaussian noise") -> StateSpaceModel:
    ps = _var_paramset("epsilon", p, cov)
    H = DynamicMatrix(np.eye(p), mmask=_var_mask(p, cov))
    upd = UpdateBinding("H", _fun_var(p, cov), np.ones(ps.w, dtype=bool))
    return StateSpaceModel(
        H=H, Z=np.zeros((p, 0)), T=np.zeros((0, 0)), R=np.zeros((0, 0)),
        Q=np.zeros((0, 0)), c=np.zeros((0, 1)), a1=np.zeros((0, 1)),
        P1=np.zeros((0, 0)), params=ps, updates=[upd],
        components=[Component(name, 0, 0, {"type": name, "p": p})], name=name,
    )


def _null_noise(p: int = 1) -> StateSpaceModel:
    return StateSpaceModel(
        H=np.zeros((p, p)), Z=np.zeros((p, 0)), T=np.zeros((0, 0)),
        R=np.zeros((0, 0)), Q=np.zeros((0, 0)), c=np.zeros((0, 1)),
        a1=np.zeros((0, 1)), P1=np.zeros((0, 0)),
        components=[Component("null noise", 0, 0, {"type": "null noise"})],
        name="null noise",
    )


def _component_model(name, meta, Z, T, R, Q=None, qparams: ParamSet = None,
                     qfun=None, p=1, P1=None, extra_updates=(), stationary_init=False):
    """Assemble a null-H structural component."""
    m = T.shape[0] if hasattr(T, "shape") else len(T)
    updates = list(extra_updates)
    if qparams is not None and qfun is not None:
        updates.insert(0, UpdateBinding("Q", qfun, np.ones(qparams.w, dtype=bool)))
    mdl = StateSpaceModel(
        H=np.zeros((p, p)), Z=Z, T=T, R=R,
        Q=Q if Q is not None else np.zeros((0, 0)),
        c=None, a1=None,
        P1=P1 if P1 is not None else np.diag(np.full(m, np.inf)),
        params=qparams if qparams is not None else ParamSet.empty(),
        updates=updates,
        components=[Component(name, 0, m, meta)], name=name,
    )
    return mdl


# --------------------------------------------------------------------------
# structural components


def _lpt_core(d: int, stochastic="all"):
    """Local polynomial trend: states (level, slope, ...), each integrating
    the next; irw variants only disturb the highest order."""
    m = d + 1
    T = np.eye(m) + np.diag(np.ones(d), 1)
    Z = np.zeros((1, m))
    Z[0, 0] = 1.0
    if stochastic == "all":
        R = np.eye(m)
        if d == 0:
            names = ["zeta var"]
        elif d == 1:
            names = ["xi var", "zeta var"]
        else:
            names = [f"zeta var {i}" for i in range(m)]
        ps = ParamSet.simple(names, "1/2 log", np.ones(m))
        Q = DynamicMatrix(np.eye(m), mmask=np.eye(m, dtype=bool))
        meta = {"type": "local polynomial trend", "d": d}
        return _component_model("local polynomial trend", meta, Z, T, R, Q,
                                ps, _fun_var(m, False))
    # integrated random walk: single disturbance on the highest derivative
    R = np.zeros((m, 1))
    R[-1, 0] = 1.0
    ps = ParamSet.simple(["zeta var"], "1/2 log", [1.0])
    Q = DynamicMatrix([[1.0]], mmask=[[True]])
    meta = {"type": "integrated random walk", "d": d}
    return _component_model("integrated random walk", meta, Z, T, R, Q,
                            ps, _fun_var(1, False))


def _seasonal(type: str, s: int) -> StateSpaceModel:
    Z, T, R = seasonal_block(type, s)
    meta = {"type": "seasonal", "subtype": type, "s": s}
    k = T.shape[0]
    if type in ("dummy fixed", "trig fixed"):
        return _component_model("seasonal", meta, Z, T, R)
    if type == "dummy":
        ps = ParamSet.simple(["omega var"], "1/2 log", [1.0])
        Q = DynamicMatrix([[1.0]], mmask=[[True]])
        return _component_model("seasonal", meta, Z, T, R, Q, ps, _fun_var(1, False))
    if type == "trig1":
        ps = ParamSet.simple(["omega var"], "1/2 log", [1.0])
        Q = DynamicMatrix(np.eye(k), mmask=np.eye(k, dtype=bool))
        return _component_model("seasonal", meta, Z, T, R, Q, ps,
                                _fun_var(1, False, dups=k))
    if type == "trig2":
        # one variance per harmonic, both cells of a pair share it
        nh = s // 2
        reps = [1 if 2 * (j + 1) == s else 2 for j in range(nh)]
        ps = ParamSet.simple([f"omega var {j + 1}" for j in range(nh)],
                             "1/2 log", np.ones(nh))

        def fun(v, reps=tuple(reps)):
            return np.repeat(v, reps)

        Q = DynamicMatrix(np.eye(k), mmask=np.eye(k, dtype=bool))
        return _component_model("seasonal", meta, Z, T, R, Q, ps, fun)
    if type == "h&s":
        # disturbances sum to zero across seasons: Q = var * (I - J/s)
        ps = ParamSet.simple(["omega var"], "1/2 log", [1.0])
        W = np.eye(s) - np.ones((s, s)) / s

        def fun(v, W=W):
            return (v[0] * W).ravel(order="F")

        Q = DynamicMatrix(W, mmask=np.ones((s, s), dtype=bool))
        return _component_model("seasonal", meta, Z, T, R, Q, ps, fun)
    raise CatalogError(f"unknown seasonal type {type!r}")


def _cycle() -> StateSpaceModel:
    ps = ParamSet(
        ("cycle var", "damping", "frequency"),
        np.array([1.0, 0.7, np.pi / 4]),
        ((1, "1/2 log"), (1, "logit01"), (1, "logit0pi")),
    )

    def fun(v):
        var, rho, lam = v
        cl, sl = np.cos(lam), np.sin(lam)
        Tcells = rho * np.array([cl, -sl, sl, cl])  # column-major 2x2
        Qcells = np.array([var, var])
        P1cells = np.array([var / (1 - rho**2), 0.0, 0.0, var / (1 - rho**2)])
        return Tcells, Qcells, P1cells

    rho0, lam0 = 0.7, np.pi / 4
    T0 = rho0 * np.array([[np.cos(lam0), np.sin(lam0)], [-np.sin(lam0), np.cos(lam0)]])
    meta = {"type": "cycle"}
    mdl = StateSpaceModel(
        H=np.zeros((1, 1)),
        Z=[[1.0, 0.0]],
        T=DynamicMatrix(T0, mmask=np.ones((2, 2), dtype=bool)),
        R=np.eye(2),
        Q=DynamicMatrix(np.eye(2), mmask=np.eye(2, dtype=bool)),
        P1=DynamicMatrix(np.eye(2) / (1 - rho0**2), mmask=np.ones((2, 2), dtype=bool)),
        params=ps,
        updates=[UpdateBinding("TQP1", fun, np.ones(3, dtype=bool))],
        components=[Component("cycle", 0, 2, meta)], name="cycle",
    )
    return mdl


def _reg(x, name=None, dynamic=False) -> StateSpaceModel:
    x = np.array(x, dtype=float, ndmin=2)
    k, n = x.shape
    Z = DynamicMatrix(np.zeros((1, k)), dmmask=np.ones((1, k), dtype=bool), dvec=x)
    T = np.eye(k)
    meta = {"type": "dynamic regression" if dynamic else "regression",
            "variable": name or "x", "k": k}
    if dynamic:
        ps = ParamSet.simple([f"beta var {i + 1}" for i in range(k)] if k > 1
                             else ["beta var"], "1/2 log", np.ones(k))
        Q = DynamicMatrix(np.eye(k), mmask=np.eye(k, dtype=bool))
        return _component_model("dynamic regression", meta, Z, T, np.eye(k), Q,
                                ps, _fun_var(k, False))
    return _component_model("regression", meta, Z, T, np.zeros((k, 0)))


def _intv(n: int, type: str, tau: int) -> StateSpaceModel:
    x = intv_variable(n, type, tau)
    Z = DynamicMatrix(np.zeros((1, 1)), dmmask=[[True]], dvec=x[None, :])
    meta = {"type": "intervention", "subtype": type, "tau": tau}
    return _component_model("intervention", meta, Z, np.eye(1), np.zeros((1, 0)))


def _constant() -> StateSpaceModel:
    meta = {"type": "constant"}
    return _component_model("constant", meta, [[1.0]], np.eye(1), np.zeros((1, 0)))


# --------------------------------------------------------------------------
# multivariate structural components


def _mv_level(p: int, cov: bool, trend: bool = False) -> StateSpaceModel:
    if not trend:
        ps = _var_paramset("eta", p, cov)
        Q = DynamicMatrix(np.eye(p), mmask=_var_mask(p, cov))
        meta = {"type": "multivariate local level", "p": p}
        return _component_model("mv level", meta, np.eye(p), np.eye(p), np.eye(p),
                                Q, ps, _fun_var(p, cov), p=p)
    Tm = np.block([[np.eye(p), np.eye(p)], [np.zeros((p, p)), np.eye(p)]])
    Z = np.hstack([np.eye(p), np.zeros((p, p))])
    ps1 = _var_paramset("xi", p, cov)
    ps2 = _var_paramset("zeta", p, cov)
    ps, masks = ParamSet.concat([ps1, ps2])
    Q = DynamicMatrix(np.eye(2 * p), mmask=_var_mask(p, cov, dups=2))
    upds = [
        UpdateBinding("Q", _fun_var(p, cov), masks[0]),
        UpdateBinding("Q", _fun_var(p, cov), masks[1]),
    ]
    meta = {"type": "multivariate local level trend", "p": p}
    mdl = StateSpaceModel(
        H=np.zeros((p, p)), Z=Z, T=Tm, R=np.eye(2 * p), Q=Q,
        params=ps, updates=upds,
        components=[Component("mv level trend", 0, 2 * p, meta)],
        name="mv level trend",
    )
    return mdl


def _mv_seasonal(p: int, cov, type: str, s: int) -> StateSpaceModel:
    Zu, Tu, Ru = seasonal_block(type if type != "h&s" else "h&s", s)
    k = Tu.shape[0]
    Z = np.kron(Zu, np.eye(p))
    T = np.kron(Tu, np.eye(p))
    meta = {"type": "multivariate seasonal", "subtype": type, "s": s, "p": p}
    if type in ("dummy fixed", "trig fixed") or cov is None or (
        isinstance(cov, (list, np.ndarray)) and len(np.atleast_1d(cov)) == 0
    ):
        if type not in ("dummy fixed", "trig fixed"):
            raise CatalogError("stochastic multivariate seasonal needs a cov flag")
        return _component_model("mv seasonal", meta, Z, T, np.zeros((k * p, 0)), p=p)
    covb = bool(np.atleast_1d(cov)[0])
    if type == "dummy":
        R = np.kron(Ru, np.eye(p))
        ps = _var_paramset("omega", p, covb)
        Q = DynamicMatrix(np.eye(p), mmask=_var_mask(p, covb))
        return _component_model("mv seasonal", meta, Z, T, R, Q, ps,
                                _fun_var(p, covb), p=p)
    if type == "trig1":
        R = np.eye(k * p)
        ps = _var_paramset("omega", p, covb)
        Q = DynamicMatrix(np.eye(k * p), mmask=_var_mask(p, covb, dups=k))
        return _component_model("mv seasonal", meta, Z, T, R, Q, ps,
                                _fun_var(p, covb, dups=k), p=p)
    if type == "trig2":
        # per-harmonic covariance blocks, interleaved over the pair states
        nh = s // 2
        reps = [1 if 2 * (j + 1) == s else 2 for j in range(nh)]
        sets = [_var_paramset(f"omega {j + 1}", p, covb) for j in range(nh)]
        ps, masks = ParamSet.concat(sets)
        upds = []
        Q = DynamicMatrix(np.eye(k * p), mmask=_var_mask(p, covb, dups=k))

        def make(rep):
            base = _fun_var(p, covb)

            def fun(v):
                return np.tile(base(v), rep)

            return fun

        for j in range(nh):
            upds.append(UpdateBinding("Q", make(reps[j]), masks[j]))
        mdl = StateSpaceModel(
            H=np.zeros((p, p)), Z=Z, T=T, R=np.eye(k * p), Q=Q,
            params=ps, updates=upds,
            components=[Component("mv seasonal", 0, k * p, meta)],
            name="mv seasonal",
        )
        return mdl
    if type == "h&s":
        W = np.eye(s) - np.ones((s, s)) / s
        ps = _var_paramset("omega", p, covb)
        base = _fun_var(p, covb)

        def fun(v, W=W):
            if covb and p > 1:
                S = base(v).reshape(p, p, order="F")
            else:
                S = np.diag(v if v.size == p else np.full(p, v[0]))
            return np.kron(W, S).ravel(order="F")

        Q = DynamicMatrix(np.kron(W, np.eye(p)),
                          mmask=np.ones((s * p, s * p), dtype=bool))
        mdl = StateSpaceModel(
            H=np.zeros((p, p)), Z=Z, T=T, R=np.eye(s * p), Q=Q,
            params=ps, updates=[UpdateBinding("Q", fun, np.ones(ps.w, dtype=bool))],
            components=[Component("mv seasonal", 0, s * p, meta)],
            name="mv seasonal",
        )
        return mdl
    raise CatalogError(f"unknown seasonal type {type!r}")


def _mv_cycle(p: int, cov=True) -> StateSpaceModel:
    covb = bool(np.atleast_1d(cov)[0]) if cov is not None else True
    k = p * (p + 1) // 2 if (covb and p > 1) else p
    names = _cov_names("cycle", p)[: k] + ["damping", "frequency"]
    groups = ((k, "cov") if (covb and p > 1) else (k, "1/2 log"),
              (1, "logit01"), (1, "logit0pi"))
    if not (covb and p > 1):
        groups = tuple((1, "1/2 log") for _ in range(k)) + ((1, "logit01"), (1, "logit0pi"))
    vals = np.concatenate([np.ones(p), np.zeros(k - p), [0.7, np.pi / 4]])
    ps = ParamSet(tuple(names), vals, groups)
    base = _fun_var(p, covb)

    def fun(v):
        var, rho, lam = v[:-2], v[-2], v[-1]
        cl, sl = np.cos(lam), np.sin(lam)
        rot = rho * np.array([[cl, sl], [-sl, cl]])
        Tc = np.kron(rot, np.eye(p)).ravel(order="F")
        Sc = base(var)
        Qc = np.tile(Sc, 2)
        P1c = np.tile(Sc / (1 - rho**2), 2)
        return Tc, Qc, P1c

    rho0, lam0 = 0.7, np.pi / 4
    rot0 = rho0 * np.array([[np.cos(lam0), np.sin(lam0)], [-np.sin(lam0), np.cos(lam0)]])
    mdl = StateSpaceModel(
        H=np.zeros((p, p)),
        Z=np.hstack([np.eye(p), np.zeros((p, p))]),
        T=DynamicMatrix(np.kron(rot0, np.eye(p)), mmask=np.ones((2 * p, 2 * p), bool)),
        R=np.eye(2 * p),
        Q=DynamicMatrix(np.eye(2 * p), mmask=_var_mask(p, covb, dups=2)),
        P1=DynamicMatrix(np.eye(2 * p) / (1 - rho0**2), mmask=_var_mask(p, covb, dups=2)),
        params=ps,
        updates=[UpdateBinding("TQP1", fun, np.ones(ps.w, dtype=bool))],
        components=[Component("mv cycle", 0, 2 * p, {"type": "multivariate cycle", "p": p})],
        name="mv cycle",
    )
    return mdl


def _mv_reg(p: int, x, dep=None) -> StateSpaceModel:
    x = np.array(x, dtype=float, ndmin=2)
    k, n = x.shape
    if dep is None:
        dep = np.ones((p, k), dtype=bool)
    dep = np.asarray(dep, dtype=bool).reshape(p, k)
    cols = [(i, j) for i in range(p) for j in range(k) if dep[i, j]]
    m = len(cols)
    Zmat = np.zeros((p, m))
    dmmask = np.zeros((p, m), dtype=bool)
    for idx, (i, j) in enumerate(cols):
        dmmask[i, idx] = True
    # one dynamic cell per Z column, so column-major cell order = state order
    dvec = np.vstack([x[j] for (i, j) in cols])
    Z = DynamicMatrix(Zmat, dmmask=dmmask, dvec=dvec)
    meta = {"type": "multivariate regression", "p": p, "k": k}
    return _component_model("mv regression", meta, Z, np.eye(m), np.zeros((m, 0)), p=p)


def _mv_intv(p: int, n: int, types, tau: int) -> StateSpaceModel:
    if isinstance(types, str):
        types = [types] * p
    if len(types) != p:
        raise CatalogError("one intervention type per series required")
    cols = [i for i, ty in enumerate(types) if ty != "null"]
    m = len(cols)
    Zmat = np.zeros((p, m))
    dmmask = np.zeros((p, m), dtype=bool)
    rows = []
    for idx, i in enumerate(cols):
        dmmask[i, idx] = True
        rows.append(intv_variable(n, types[i], tau))
    if m == 0:
        return _component_model("mv intervention",
                                {"type": "multivariate intervention", "subtype": "null"},
                                Zmat, np.zeros((0, 0)), np.zeros((0, 0)), p=p)
    Z = DynamicMatrix(Zmat, dmmask=dmmask, dvec=np.vstack(rows))
    meta = {"type": "multivariate intervention", "subtype": list(types), "tau": tau}
    return _component_model("mv intervention", meta, Z, np.eye(m), np.zeros((m, 0)), p=p)


def _commonlvls(p: int, A_ast, a_ast) -> StateSpaceModel:
    A = np.array(A_ast, dtype=float, ndmin=2)
    r = A.shape[1]
    if A.shape[0] != p - r:
        raise CatalogError("A* must be (p - r) x r")
    a = np.asarray(a_ast, dtype=float).reshape(p - r)
    # states: r common levels plus one constant carrying the offset a*
    Z = np.zeros((p, r + 1))
    Z[:r, :r] = np.eye(r)
    Z[r:, :r] = A
    Z[r:, r] = a
    T = np.eye(r + 1)
    R = np.vstack([np.eye(r), np.zeros((1, r))])
    ps = _var_paramset("eta", r, True)
    Q = DynamicMatrix(np.eye(r), mmask=_var_mask(r, True))
    P1 = np.diag(np.concatenate([np.full(r, np.inf), [0.0]]))
    a1 = np.concatenate([np.zeros(r), [1.0]])[:, None]
    mdl = StateSpaceModel(
        H=np.zeros((p, p)), Z=Z, T=T, R=R, Q=Q, a1=a1, P1=P1,
        params=ps, updates=[UpdateBinding("Q", _fun_var(r, True), np.ones(ps.w, bool))],
        components=[Component("common levels", 0, r + 1,
                              {"type": "common levels", "p": p, "r": r})],
        name="common levels",
    )
    return combine_additive([_noise_model(p, True), mdl])


# --------------------------------------------------------------------------
# ARIMA-type models


def _arma_core_mats(k: int, phi, theta):
    """Companion matrices for an ARMA core of dimension k."""
    T = np.zeros((k, k))
    T[:-1, 1:] = np.eye(k - 1)
    T[: len(phi), 0] = phi
    R = np.zeros((k, 1))
    R[0, 0] = 1.0
    R[1 : 1 + len(theta), 0] = theta
    return T, R


def _stationary_P1(T, R, var):
    return dlyap(T, var * (R @ R.T))


def _sarma_paramset(p, q, P, Q, mean_names=()):
    names, groups = [], []
    if p:
        names += [f"phi {i + 1}" for i in range(p)]
        groups.append((p, "arma"))
    if q:
        names += [f"theta {i + 1}" for i in range(q)]
        groups.append((q, "ma"))
    if P:
        names += [f"seasonal phi {i + 1}" for i in range(P)]
        groups.append((P, "arma"))
    if Q:
        names += [f"seasonal theta {i + 1}" for i in range(Q)]
        groups.append((Q, "ma"))
    names += ["eta var"]
    groups.append((1, "1/2 log"))
    vals = np.concatenate([np.zeros(p + q + P + Q), [1.0]])
    return ParamSet(tuple(names), vals, tuple(groups))


def _build_lagged_arma(code, p, q, P, Q, s, dpoly, mean, meta_extra=None):
    """Shared builder for arma/arima/sarima/sumarma.

    ``dpoly`` is the full differencing polynomial (increasing order, leading
    1): the first len(dpoly)-1 states hold lagged observations with diffuse
    initialization; an ARMA companion core and optional diffuse mean state
    follow.
    """
    klag = len(dpoly) - 1
    delta = -np.asarray(dpoly[1:], dtype=float)
    kar = p + s * P
    kma = q + s * Q
    k = max(kar, kma + 1)
    m = klag + k + (1 if mean else 0)

    ps = _sarma_paramset(p, q, P, Q)
    phi0 = np.zeros(kar)
    theta0 = np.zeros(kma)
    Tcore, Rcore = _arma_core_mats(k, phi0, theta0)
    P1core = _stationary_P1(Tcore, Rcore, 1.0)

    Z = np.zeros((1, m))
    Z[0, :klag] = delta
    Z[0, klag] = 1.0
    T = np.zeros((m, m))
    if klag:
        # first row reconstructs y_t; remaining lag rows shift
        T[0, :klag] = delta
        T[0, klag] = 1.0
        T[1:klag, : klag - 1] = np.eye(klag - 1)
    T[klag : klag + k, klag : klag + k] = Tcore
    R = np.zeros((m, 1))
    R[klag : klag + k, 0] = Rcore[:, 0]
    if mean:
        Z[0, -1] = 1.0
        T[-1, -1] = 1.0
        if klag:
            T[0, -1] = 1.0

    Tmask = np.zeros((m, m), dtype=bool)
    Tmask[klag : klag + kar, klag] = True
    Rmask = np.zeros((m, 1), dtype=bool)
    Rmask[klag + 1 : klag + 1 + kma, 0] = True
    Qmask = np.array([[True]])
    P1 = np.diag(np.concatenate([np.full(klag, np.inf), np.zeros(k),
                                 np.full(1 if mean else 0, np.inf)]))
    P1[klag : klag + k, klag : klag + k] = P1core
    P1mask = np.zeros((m, m), dtype=bool)
    P1mask[klag : klag + k, klag : klag + k] = True

    def fun(v):
        at = 0
        phi = v[at : at + p]; at += p
        theta = v[at : at + q]; at += q
        Phi = v[at : at + P]; at += P
        Theta = v[at : at + Q]; at += Q
        var = v[at]
        phis = combined_lag_poly(phi, Phi, s, -1.0) if (p or P) else np.zeros(0)
        thetas = combined_lag_poly(theta, Theta, s, 1.0) if (q or Q) else np.zeros(0)
        phis = np.concatenate([phis, np.zeros(kar - phis.size)])
        thetas = np.concatenate([thetas, np.zeros(kma - thetas.size)])
        Tc, Rc = _arma_core_mats(k, phis, thetas)
        P1c = _stationary_P1(Tc, Rc, var)
        return phis, thetas, np.array([var]), P1c.ravel(order="F")

    adjacency = ("T" if kar else "") + ("R" if kma else "") + "QP1"
    meta = {"type": code, "p": p, "q": q, "P": P, "Q": Q, "s": s,
            "d": klag, "mean": bool(mean)}
    meta.update(meta_extra or {})
    mdl = StateSpaceModel(
        H=np.zeros((1, 1)),
        Z=Z,
        T=DynamicMatrix(T, mmask=Tmask),
        R=DynamicMatrix(R, mmask=Rmask),
        Q=DynamicMatrix([[1.0]], mmask=Qmask),
        P1=DynamicMatrix(P1, mmask=P1mask),
        params=ps,
        updates=[UpdateBinding(adjacency, _strip_unused(fun, kar, kma), np.ones(ps.w, bool))],
        components=[Component(code, 0, m, meta)], name=code,
    )
    return mdl.with_params(ps.values)


def _strip_unused(fun, kar, kma):
    """Drop outputs whose adjacency codes are absent (degenerate orders)."""
    def wrapped(v):
        phis, thetas, var, p1 = fun(v)
        out = []
        if kar:
            out.append(phis)
        if kma:
            out.append(thetas)
        out.append(var)
        out.append(p1)
        return tuple(out)
    return wrapped


def _arma(p, q, mean=False):
    return _build_lagged_arma("arma", p, q, 0, 0, 1, np.array([1.0]), mean,
                              {"d_reg": 0, "D_seas": 0})


def _arima(p, d, q, mean=False):
    return _build_lagged_arma("arima", p, q, 0, 0, 1, diff_poly(d, 0, 1), mean,
                              {"d_reg": d, "D_seas": 0})


def _sarima(p, d, q, P, D, Q, s, mean=False):
    return _build_lagged_arma("sarima", p, q, P, Q, s, diff_poly(d, D, s), mean,
                              {"d_reg": d, "D_seas": D})


def _sumarma(p, q, D, s, mean=False):
    return _build_lagged_arma("sumarma", p, q, 0, 0, 1,
                              polypow(seasonal_sum_poly(s), D), mean,
                              {"d_reg": 0, "D_seas": 0, "D_sum": D, "s_sum": s})


def _airline(s=12):
    mdl = _sarima(0, 1, 1, 0, 1, 1, s, False)
    return _rename(mdl, "airline")


def _rename(mdl, name):
    from dataclasses import replace

    comps = tuple(Component(name, c.start, c.stop, {**c.meta, "type": name})
                  for c in mdl.components)
    return replace(mdl, name=name, components=comps)


def _split_unit_roots(ar, tol=1e-7):
    """Factor an AR polynomial into (unit-root part, stationary part).

    Roots on the unit circle (within ``tol``) go to the differencing
    polynomial; the rest stay as stationary AR coefficients.
    """
    ar = np.asarray(ar, dtype=float)
    if ar.size == 1:
        return np.array([1.0]), np.zeros(0)
    roots = np.roots(ar[::-1])  # B-plane roots
    on_circle = np.abs(np.abs(roots) - 1.0) <= tol
    pf = np.polynomial.polynomial.polyfromroots

    def as_poly(sel):
        if not np.any(sel):
            return np.array([1.0])
        c = np.real(pf(roots[sel]))
        return c / c[0]

    dpoly = as_poly(on_circle)
    stat = as_poly(~on_circle)
    return dpoly, -stat[1:]


def _const_lag_component(name, ar, ma, var) -> StateSpaceModel:
    """Constant component with AR factor ``ar`` (unit roots become diffuse
    lag states), MA factor ``ma`` and innovation variance ``var``."""
    ar = np.asarray(ar, dtype=float)
    ma = np.asarray(ma, dtype=float)
    if ma.size == 0 or abs(ma[0]) < 1e-300:
        ma = np.array([1.0])
    dpoly, phi = _split_unit_roots(ar)
    theta = ma[1:] / ma[0]
    var = float(var) * float(ma[0]) ** 2
    klag = dpoly.size - 1
    delta = -dpoly[1:]
    kar = phi.size
    kma = theta.size
    k = max(kar, kma + 1)
    Tc, Rc = _arma_core_mats(k, np.concatenate([phi, np.zeros(k - kar)]),
                             np.concatenate([theta, np.zeros(k - 1 - kma)]))
    m = klag + k
    Z = np.zeros((1, m))
    Z[0, :klag] = delta
    Z[0, klag] = 1.0
    T = np.zeros((m, m))
    if klag:
        T[0, :klag] = delta
        T[0, klag] = 1.0
        T[1:klag, : klag - 1] = np.eye(klag - 1)
    T[klag:, klag:] = Tc
    R = np.zeros((m, 1))
    R[klag:, 0] = Rc[:, 0]
    P1 = np.diag(np.concatenate([np.full(klag, np.inf), np.zeros(k)]))
    P1[klag:, klag:] = _stationary_P1(Tc, Rc, var) if var > 0 else np.zeros((k, k))
    return StateSpaceModel(
        H=np.zeros((1, 1)), Z=Z, T=T, R=R, Q=np.array([[var]]), P1=P1,
        components=[Component(name, 0, m, {"type": name})], name=name,
    )


def _arimacom(d, D, s, phi_list, theta_list, ksivar) -> StateSpaceModel:
    """Decomposed-ARIMA components model: one lag-polynomial block per
    component (trend, seasonal, extra MA), irregular variance as H."""
    ksivar = list(np.atleast_1d(ksivar))
    if len(ksivar) != len(theta_list) + 1:
        raise CatalogError("need one variance per component plus the irregular")
    names = _component_names_htd(d, D, s, len(theta_list))
    phi_list = list(phi_list) + [np.array([1.0])] * (len(theta_list) - len(phi_list))
    parts = [
        _const_lag_component(name, ar, ma, var)
        for name, ar, ma, var in zip(names, phi_list, theta_list, ksivar[:-1])
    ]
    noise = StateSpaceModel(
        H=np.array([[ksivar[-1]]]), Z=np.zeros((1, 0)), T=np.zeros((0, 0)),
        R=np.zeros((0, 0)), Q=np.zeros((0, 0)),
        components=[Component("irregular", 0, 0, {"type": "irregular"})],
        name="irregular",
    )
    mdl = combine_additive([noise] + parts)
    return _rename_keep(mdl, "arima components")


def _component_names_htd(d, D, s, ncomp):
    names = []
    if d + D > 0:
        names.append("trend")
    if D > 0 and s > 1:
        names.append("seasonal")
    while len(names) < ncomp:
        names.append(f"transitory {len(names) + 1}")
    return names[:ncomp]


def _rename_keep(mdl, name):
    from dataclasses import replace

    return replace(mdl, name=name)


def _spline(delta) -> StateSpaceModel:
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if np.any(delta < 0):
        raise CatalogError("spline time steps must be nonnegative")
    ps = ParamSet.simple(["zeta var"], "1/2 log", [1.0])
    scalar = delta.size == 1

    def qcells(var, dlt):
        return np.vstack([
            var * dlt**3 / 3.0,
            var * dlt**2 / 2.0,
            var * dlt**2 / 2.0,
            var * dlt,
        ])

    if scalar:
        dl = float(delta[0])
        T = np.array([[1.0, dl], [0.0, 1.0]])

        def fun(v, dl=dl):
            return qcells(v[0], np.array([dl]))[:, 0]

        Q = DynamicMatrix(qcells(1.0, np.array([dl]))[:, 0].reshape(2, 2, order="F"),
                          mmask=np.ones((2, 2), dtype=bool))
        core = StateSpaceModel(
            H=np.zeros((1, 1)), Z=[[1.0, 0.0]], T=T, R=np.eye(2), Q=Q,
            params=ps, updates=[UpdateBinding("Q", fun, np.ones(1, bool))],
            components=[Component("spline trend", 0, 2, {"type": "spline", "delta": dl})],
            name="spline trend",
        )
    else:
        n = delta.size
        T = DynamicMatrix(np.array([[1.0, 0.0], [0.0, 1.0]]),
                          dmmask=[[False, True], [False, False]], dvec=delta[None, :])
        Qd = DynamicMatrix(
            np.zeros((2, 2)), dmmask=np.ones((2, 2), dtype=bool),
            dvec=qcells(1.0, delta), dvmask=np.ones(4, dtype=bool),
        )

        def fun(v, delta=delta):
            return qcells(v[0], delta)

        core = StateSpaceModel(
            H=np.zeros((1, 1)), Z=[[1.0, 0.0]], T=T, R=np.eye(2), Q=Qd,
            params=ps, updates=[UpdateBinding("Qd", fun, np.ones(1, bool))],
            components=[Component("spline trend", 0, 2, {"type": "spline"})],
            name="spline trend",
        )
    return combine_additive([_noise_model(1, True), core])


# --------------------------------------------------------------------------
# dispatch table


def _stsm(lvl, seas, s, cycle=False, x=None):
    if lvl not in ("level", "trend"):
        raise CatalogError("stsm level spec must be 'level' or 'trend'")
    parts = [_noise_model(1, True),
             _lpt_core(0 if lvl == "level" else 1),
             _seasonal(seas, s)]
    if cycle:
        parts.append(_cycle())
    if x is not None:
        parts.append(_reg(x))
    return combine_additive(parts)


def _mvstsm(p, cov, lvl, seas, s, cycle=False, x=None, dep=None):
    cov = list(np.atleast_1d(cov)) if cov is not None else [True] * 4
    while len(cov) < 4:
        cov.append(True)
    parts = [_noise_model(p, bool(cov[0])),
             _mv_level(p, bool(cov[1]), trend=(lvl == "trend")),
             _mv_seasonal(p, None if seas.endswith("fixed") else [cov[2]], seas, s)]
    if cycle:
        parts.append(_mv_cycle(p, [cov[3]]))
    if x is not None:
        parts.append(_mv_reg(p, x, dep))
    return combine_additive(parts)


def _make_ng_noise(code, *args, **kwargs):
    from .nongauss import make_distribution

    spec = make_distribution(code, *args, **kwargs)
    p = spec.nrows
    H = DynamicMatrix(np.zeros((p, p)), dmmask=np.eye(p, dtype=bool),
                      dvec=np.zeros((p, 1)))
    updates = []
    params = ParamSet.empty()
    if spec.variable:
        from .nongauss import distribution_paramset

        params = distribution_paramset(code, *args, **kwargs)

        def fun(v, code=code, args=args, kwargs=kwargs):
            return [make_distribution(code, *args, params=v, **kwargs)]

        updates = [UpdateBinding("Hng", fun, np.ones(params.w, dtype=bool))]
    return StateSpaceModel(
        H=Disturbance(H, [spec]), Z=np.zeros((p, 0)), T=np.zeros((0, 0)),
        R=np.zeros((0, 0)), Q=np.zeros((0, 0)), c=np.zeros((0, 1)),
        a1=np.zeros((0, 1)), P1=np.zeros((0, 0)), params=params,
        updates=updates,
        components=[Component(f"{code} noise", 0, 0, {"type": f"{code} noise"})],
        name=f"{code} noise",
    )


def predefined(code: str, *args, **kwargs) -> StateSpaceModel:
    """Build a predefined model by its string code.

    Noise: gaussian | normal | null | poisson | binary | binomial |
    negbinomial | exp | multinomial | expfamily | t.
    Structural: irw | lpt | llm | llt | seasonal | cycle | reg | dynreg |
    intv | constant | stsm | commonlvls | mvllm | mvllt | mvseasonal |
    mvcycle | mvreg | mvintv | mvstsm.
    ARIMA-type: arma | arima | sarima | sumarma | airline | arimacom.
    Other: spline.
    """
    key = code.lower()
    if key in _OUT_OF_SCOPE:
        raise OutOfScopeError(f"catalog: out of scope: {code!r} ({_OUT_OF_SCOPE[key]})")
    try:
        builder = _CATALOG[key]
    except KeyError:
        raise CatalogError(f"unknown model code {code!r}") from None
    try:
        return builder(*args, **kwargs)
    except TypeError as exc:
        raise CatalogError(f"bad arguments for {code!r}: {exc}") from None


_CATALOG = {
    "gaussian": lambda p=1, cov=True: _noise_model(p, cov),
    "normal": lambda p=1, cov=True: _noise_model(p, cov),
    "null": lambda p=1: _null_noise(p),
    "poisson": lambda: _make_ng_noise("poisson"),
    "binary": lambda: _make_ng_noise("binary"),
    "binomial": lambda k: _make_ng_noise("binomial", k),
    "negbinomial": lambda k: _make_ng_noise("negbinomial", k),
    "exp": lambda: _make_ng_noise("exp"),
    "multinomial": lambda h, k: _make_ng_noise("multinomial", h, k),
    "expfamily": lambda b, d2b, id2bdb, c: _make_ng_noise("expfamily", b, d2b, id2bdb, c),
    "t": lambda nu=None: _make_ng_noise("t", nu),
    "llm": lambda: combine_additive([_noise_model(1, True), _lpt_core(0)]),
    "llt": lambda: combine_additive([_noise_model(1, True), _lpt_core(1)]),
    "lpt": lambda d: combine_additive([_noise_model(1, True), _lpt_core(d)]),
    "irw": lambda d: combine_additive([_noise_model(1, True), _lpt_core(d, "last")]),
    "seasonal": lambda type, s: _seasonal(type, s),
    "cycle": lambda: _cycle(),
    "reg": lambda x, name=None: _reg(x, name),
    "dynreg": lambda x, name=None: _reg(x, name, dynamic=True),
    "intv": lambda n, type, tau: _intv(n, type, tau),
    "constant": lambda: _constant(),
    "stsm": _stsm,
    "commonlvls": _commonlvls,
    "mvllm": lambda p, cov=True: combine_additive(
        [_noise_model(p, True), _mv_level(p, bool(np.atleast_1d(cov)[0]))]),
    "mvllt": lambda p, cov=True: combine_additive(
        [_noise_model(p, True), _mv_level(p, bool(np.atleast_1d(cov)[0]), trend=True)]),
    "mvseasonal": lambda p, cov, type, s: _mv_seasonal(p, cov, type, s),
    "mvcycle": lambda p, cov=True: _mv_cycle(p, cov),
    "mvreg": lambda p, x, dep=None: _mv_reg(p, x, dep),
    "mvintv": lambda p, n, type, tau: _mv_intv(p, n, type, tau),
    "mvstsm": _mvstsm,
    "arma": lambda p, q, mean=False: _arma(p, q, mean),
    "arima": lambda p, d, q, mean=False: _arima(p, d, q, mean),
    "sarima": lambda p, d, q, P, D, Q, s, mean=False: _sarima(p, d, q, P, D, Q, s, mean),
    "sumarma": lambda p, q, D, s, mean=False: _sumarma(p, q, D, s, mean),
    "airline": lambda s=12: _airline(s),
    "arimacom": _arimacom,
    "spline": _spline,
}
