"""State-space model assembly: elements, update bindings, combination.

A model bundles the eight system elements (H, Z, T, R, Q, c, a1, P1), any
non-Gaussian disturbance specs attached to H or Q, a parameter set, and a
list of update bindings.  Each binding names the element parts its function
refreshes via an adjacency row; when several functions feed one element part,
their outputs are stacked vertically in binding order before being written
into the variable cells.  Additive combination concatenates Z horizontally,
block-diagonals T/R/Q/P1, stacks c/a1, and keeps the first model's H.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .dynmat import DynamicMatrix, blockdiag, hcat, vcat
from .params import ParamSet

__all__ = [
    "ELEMENT_CODES",
    "AdjacencyRow",
    "NonlinearUnsupportedError",
    "NonGaussianSpec",
    "UpdateBinding",
    "Component",
    "StateSpaceModel",
    "apply_updates",
    "combine_additive",
    "validate",
]

log = logging.getLogger(__name__)

# Canonical order of updatable element parts; update functions return their
# outputs in this order (with omissions).  The two nonlinear codes are
# recognized by the parser but unsupported.
ELEMENT_CODES = (
    "H", "Z", "T", "R", "Q", "c", "a1", "P1",
    "Hd", "Zd", "Td", "Rd", "Qd", "cd",
    "Hng", "Qng",
)
_NONLINEAR_CODES = ("Znl", "Tnl")
_ALL_TOKENS = sorted(ELEMENT_CODES + _NONLINEAR_CODES, key=len, reverse=True)


class NonlinearUnsupportedError(ValueError):
    """Adjacency referenced a nonlinear element part (Znl/Tnl)."""


@dataclass(frozen=True)
class AdjacencyRow:
    """Set of element-part codes one update function feeds."""

    flags: frozenset

    @classmethod
    def parse(cls, text: str) -> "AdjacencyRow":
        """Parse a concatenation of codes ('QdH', 'TRQP1', ...), any order,
        greedy longest-token match."""
        found, pos = [], 0
        while pos < len(text):
            for tok in _ALL_TOKENS:
                if text.startswith(tok, pos):
                    found.append(tok)
                    pos += len(tok)
                    break
            else:
                raise ValueError(f"cannot parse adjacency string {text!r} at position {pos}")
        bad = [t for t in found if t in _NONLINEAR_CODES]
        if bad:
            raise NonlinearUnsupportedError(
                f"nonlinear element parts {bad} are not supported"
            )
        return cls(frozenset(found))

    @classmethod
    def of(cls, *codes: str) -> "AdjacencyRow":
        return cls.parse("".join(codes))

    def ordered(self) -> tuple:
        return tuple(c for c in ELEMENT_CODES if c in self.flags)

    def __contains__(self, code: str) -> bool:
        return code in self.flags


@dataclass(frozen=True)
class NonGaussianSpec:
    """One non-Gaussian disturbance distribution and the rows it governs.

    ``kind`` is ``"exp_family"`` or ``"additive_noise"``.  ``rows`` masks the
    disturbance elements governed by this distribution.  ``approx_var`` maps
    (observations-or-samples, signal) to per-time approximating Gaussian
    variances; ``logp`` returns per-time log densities.  Extra callables used
    by exponential-family linearization live in ``funcs``.
    """

    kind: str
    rows: np.ndarray
    approx_var: callable = None
    logp: callable = None
    funcs: dict = field(default_factory=dict)
    variable: bool = False
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "rows", np.asarray(self.rows, dtype=bool).ravel())
        if self.kind not in ("exp_family", "additive_noise"):
            raise ValueError(f"unknown non-Gaussian kind {self.kind!r}")

    @property
    def nrows(self) -> int:
        return int(self.rows.sum())


@dataclass(frozen=True)
class Disturbance:
    """Variance matrix plus optional non-Gaussian distributions on its rows."""

    mat: DynamicMatrix
    specs: tuple = ()

    def __post_init__(self):
        mat = self.mat if isinstance(self.mat, DynamicMatrix) else DynamicMatrix(self.mat)
        object.__setattr__(self, "mat", mat)
        object.__setattr__(self, "specs", tuple(self.specs))
        claimed = np.zeros(mat.shape[0], dtype=bool)
        for s in self.specs:
            if s.rows.size != mat.shape[0]:
                raise ValueError("spec row mask does not match disturbance dimension")
            if np.any(claimed & s.rows):
                raise ValueError("non-Gaussian specs claim overlapping rows")
            claimed |= s.rows
        object.__setattr__(self, "_claimed", claimed)

    @property
    def gaussian(self) -> bool:
        return not self.specs


@dataclass(frozen=True)
class UpdateBinding:
    """(adjacency row, update function, parameter mask) triple."""

    adjacency: AdjacencyRow
    func: callable
    pmask: np.ndarray

    def __post_init__(self):
        adj = self.adjacency
        if isinstance(adj, str):
            adj = AdjacencyRow.parse(adj)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "pmask", np.asarray(self.pmask, dtype=bool).ravel())


@dataclass(frozen=True)
class Component:
    """Signal component metadata: name and state-index span [start, stop)."""

    name: str
    start: int
    stop: int
    meta: dict = field(default_factory=dict)

    @property
    def width(self) -> int:
        return self.stop - self.start


def _as_dyn(x, shape=None) -> DynamicMatrix:
    if isinstance(x, DynamicMatrix):
        return x
    arr = np.array(x, dtype=float, ndmin=2)
    if shape is not None:
        arr = arr.reshape(shape)
    return DynamicMatrix(arr)


@dataclass(frozen=True)
class StateSpaceModel:
    """A linear (possibly non-Gaussian) state-space model.

    Observation:  y_t = Z_t alpha_t + eps_t,    eps_t ~ H_t
    Transition:   alpha_{t+1} = c_t + T_t alpha_t + R_t eta_t,  eta_t ~ Q_t
    Initial:      alpha_1 ~ N(a1, P1); +inf on P1's diagonal marks exact
                  diffuse elements.
    """

    H: Disturbance
    Z: DynamicMatrix
    T: DynamicMatrix
    R: DynamicMatrix
    Q: Disturbance
    c: DynamicMatrix = None
    a1: DynamicMatrix = None
    P1: DynamicMatrix = None
    params: ParamSet = None
    updates: tuple = ()
    components: tuple = ()
    name: str = ""
    approximated: bool = False

    def __post_init__(self):
        H = self.H if isinstance(self.H, Disturbance) else Disturbance(_as_dyn(self.H))
        Q = self.Q if isinstance(self.Q, Disturbance) else Disturbance(_as_dyn(self.Q))
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "Z", _as_dyn(self.Z))
        object.__setattr__(self, "T", _as_dyn(self.T))
        object.__setattr__(self, "R", _as_dyn(self.R))
        m = self.T.shape[0]
        object.__setattr__(self, "c", _as_dyn(self.c, (m, 1)) if self.c is not None
                           else DynamicMatrix(np.zeros((m, 1))))
        object.__setattr__(self, "a1", _as_dyn(self.a1, (m, 1)) if self.a1 is not None
                           else DynamicMatrix(np.zeros((m, 1))))
        if self.P1 is None:
            P1 = DynamicMatrix(np.diag(np.full(m, np.inf)))
        else:
            P1 = _as_dyn(self.P1)
        object.__setattr__(self, "P1", P1)
        object.__setattr__(self, "params", self.params or ParamSet.empty())
        object.__setattr__(self, "updates", tuple(self.updates))
        object.__setattr__(self, "components", tuple(self.components))

    # -- dimensions -------------------------------------------------------
    @property
    def p(self) -> int:
        return self.Z.shape[0]

    @property
    def m(self) -> int:
        return self.T.shape[0]

    @property
    def r(self) -> int:
        return self.R.shape[1]

    @property
    def w(self) -> int:
        return self.params.w

    @property
    def q_diffuse(self) -> int:
        """Number of initial diffuse state elements."""
        return int(np.sum(np.isinf(np.diag(self.P1.mat))))

    @property
    def n(self) -> int:
        """Time points carried by dynamic elements (1 for stationary models)."""
        return max(
            self.H.mat.n, self.Z.n, self.T.n, self.R.n, self.Q.mat.n, self.c.n
        )

    @property
    def gaussian(self) -> bool:
        return self.H.gaussian and self.Q.gaussian

    @property
    def gauss_ready(self) -> bool:
        """True when Gaussian algorithms may run directly (Gaussian model, or
        a non-Gaussian one whose approximating variances are baked in)."""
        return self.gaussian or self.approximated

    @property
    def param_values(self) -> np.ndarray:
        return self.params.values.copy()

    @property
    def psi(self) -> np.ndarray:
        return self.params.psi

    def with_params(self, values) -> "StateSpaceModel":
        """Set untransformed parameter values and refresh all bound elements."""
        ps = self.params.with_values(values)
        return apply_updates(replace(self, params=ps), ps.psi)

    def with_psi(self, psi) -> "StateSpaceModel":
        """Set unconstrained parameter values and refresh all bound elements."""
        return apply_updates(self, psi)

    def validate(self) -> list:
        return validate(self)


# -- update machinery -----------------------------------------------------

def _element_parts(model):
    """Mapping code -> (kind, current object)."""
    return {
        "H": ("mat", model.H.mat), "Z": ("mat", model.Z), "T": ("mat", model.T),
        "R": ("mat", model.R), "Q": ("mat", model.Q.mat), "c": ("mat", model.c),
        "a1": ("mat", model.a1), "P1": ("mat", model.P1),
        "Hd": ("dyn", model.H.mat), "Zd": ("dyn", model.Z), "Td": ("dyn", model.T),
        "Rd": ("dyn", model.R), "Qd": ("dyn", model.Q.mat), "cd": ("dyn", model.c),
        "Hng": ("ng", model.H), "Qng": ("ng", model.Q),
    }


def apply_updates(model: StateSpaceModel, psi) -> StateSpaceModel:
    """Re-evaluate all update bindings at the unconstrained vector ``psi``.

    Each function receives the untransformed values of its parameter subset
    and returns one output per flagged code, in canonical element order.
    Outputs feeding the same element part are stacked in binding order.
    """
    psi = np.asarray(psi, dtype=float).ravel()
    if psi.size != model.w:
        raise ValueError(f"psi has length {psi.size}, expected {model.w}")
    params = model.params.with_psi(psi)
    if not model.updates:
        return replace(model, params=params)
    values = params.values
    collected = {}  # code -> list of outputs in binding order
    for i, binding in enumerate(model.updates):
        out = binding.func(values[binding.pmask])
        codes = binding.adjacency.ordered()
        if len(codes) == 1 and not (isinstance(out, tuple) and len(out) == 1):
            out = (out,)
        if len(out) != len(codes):
            raise ValueError(
                f"update function {i} returned {len(out)} outputs for codes {codes}"
            )
        for code, val in zip(codes, out):
            collected.setdefault(code, []).append((i, val))

    parts = _element_parts(model)
    new = {"H": model.H.mat, "Z": model.Z, "T": model.T, "R": model.R,
           "Q": model.Q.mat, "c": model.c, "a1": model.a1, "P1": model.P1}
    new_specs = {"H": model.H.specs, "Q": model.Q.specs}

    for code, pieces in collected.items():
        kind, _ = parts[code]
        base = code[:-1] if kind == "dyn" else (code[:-2] if kind == "ng" else code)
        target = new[base] if kind != "ng" else None
        if kind == "mat":
            vec = np.concatenate([np.asarray(v, dtype=float).ravel() for _, v in pieces])
            if not np.all(np.isfinite(vec)):
                bad = [i for i, v in pieces if not np.all(np.isfinite(np.asarray(v, float)))]
                raise FloatingPointError(f"update function {bad[0]} produced non-finite {code} values")
            if vec.size != target.n_var:
                raise ValueError(
                    f"stacked {code} update has {vec.size} values for {target.n_var} variable cells"
                )
            new[base] = target.with_values(vec)
        elif kind == "dyn":
            rows = [np.atleast_2d(np.asarray(v, dtype=float)) for _, v in pieces]
            width = max(r.shape[1] for r in rows)
            rows = [np.repeat(r, width, axis=1) if r.shape[1] == 1 and width > 1 else r
                    for r in rows]
            if len({r.shape[1] for r in rows}) > 1:
                raise ValueError(f"stacked {code} update rows have mismatched widths")
            stacked = np.vstack(rows)
            if not np.all(np.isfinite(stacked)):
                raise FloatingPointError(f"an update function produced non-finite {code} values")
            if stacked.shape[0] != target.n_dvar:
                raise ValueError(
                    f"stacked {code} update has {stacked.shape[0]} rows for "
                    f"{target.n_dvar} variable dynamic rows"
                )
            new[base] = target.with_dvec(stacked)
        else:  # ng: replacement specs for the variable distributions, in order
            repl = []
            for _, v in pieces:
                repl.extend(v if isinstance(v, (list, tuple)) else [v])
            old = new_specs[base]
            variable = [s for s in old if s.variable]
            if len(repl) != len(variable):
                raise ValueError(
                    f"{code} update supplied {len(repl)} distributions for "
                    f"{len(variable)} variable ones"
                )
            it = iter(repl)
            out = []
            for s in old:
                if s.variable:
                    r = next(it)
                    out.append(replace(r, rows=s.rows, variable=True))
                else:
                    out.append(s)
            new_specs[base] = tuple(out)

    return replace(
        model,
        H=Disturbance(new["H"], new_specs["H"]),
        Z=new["Z"], T=new["T"], R=new["R"],
        Q=Disturbance(new["Q"], new_specs["Q"]),
        c=new["c"], a1=new["a1"], P1=new["P1"],
        params=params,
    )


# -- combination ------------------------------------------------------------

def combine_additive(models) -> StateSpaceModel:
    """Combine models additively: signals sum into one observation vector.

    Z concatenates horizontally; T, R, Q, P1 block-diagonally; c and a1
    stack; only the first model's observation disturbance H is kept (a
    warning is logged when a later model carries a non-null H).  Parameters
    concatenate with per-source masks and update bindings are re-indexed.
    """
    models = list(models)
    if not models:
        raise ValueError("need at least one model")
    p = models[0].p
    for mdl in models[1:]:
        if mdl.p != p:
            raise ValueError(f"observation dimension mismatch: {mdl.p} vs {p}")
        if mdl.H.specs or np.any(mdl.H.mat.mat != 0) or not mdl.H.mat.stationary:
            log.warning(
                "combine: observation disturbance of a later model (%s) is discarded",
                mdl.name or "unnamed",
            )

    Z = hcat(*[mdl.Z for mdl in models])
    T = blockdiag(*[mdl.T for mdl in models])
    R = blockdiag(*[mdl.R for mdl in models])
    Q = blockdiag(*[mdl.Q.mat for mdl in models])
    P1 = blockdiag(*[mdl.P1 for mdl in models])
    c = vcat(*[mdl.c for mdl in models])
    a1 = vcat(*[mdl.a1 for mdl in models])
    H = models[0].H

    params, pmasks = ParamSet.concat([mdl.params for mdl in models])
    updates = []
    for mdl, mask in zip(models, pmasks):
        idx = np.flatnonzero(mask)
        for b in mdl.updates:
            pm = np.zeros(params.w, dtype=bool)
            pm[idx[b.pmask]] = True
            adj = b.adjacency
            if mdl is not models[0] and ("H" in adj or "Hd" in adj or "Hng" in adj):
                kept = frozenset(f for f in adj.flags if f not in ("H", "Hd", "Hng"))
                if not kept:
                    continue
                adj = AdjacencyRow(kept)
            updates.append(UpdateBinding(adj, b.func, pm))

    components, at = [], 0
    for mdl in models:
        for comp in mdl.components:
            components.append(Component(comp.name, comp.start + at, comp.stop + at, comp.meta))
        if not mdl.components and mdl.m > 0:
            components.append(Component(mdl.name or "component", at, at + mdl.m, {}))
        at += mdl.m

    qspecs = []
    r_at = 0
    r_total = sum(mdl.r for mdl in models)
    for mdl in models:
        for s in mdl.Q.specs:
            rows = np.zeros(r_total, dtype=bool)
            rows[r_at : r_at + mdl.r] = s.rows
            qspecs.append(replace(s, rows=rows))
        r_at += mdl.r

    return StateSpaceModel(
        H=H, Z=Z, T=T, R=R, Q=Disturbance(Q, tuple(qspecs)), c=c, a1=a1, P1=P1,
        params=params, updates=tuple(updates), components=tuple(components),
        name=models[0].name,
    )


# -- validation -------------------------------------------------------------

def validate(model: StateSpaceModel) -> list:
    """All dimension/invariant violations as diagnostic strings (empty = ok)."""
    out = []
    p, m, r = model.p, model.m, model.r

    def chk(cond, msg):
        if not cond:
            out.append(msg)

    chk(model.H.mat.shape == (p, p), f"H is {model.H.mat.shape}, expected {(p, p)}")
    chk(model.Z.shape == (p, m), f"Z is {model.Z.shape}, expected {(p, m)}")
    chk(model.T.shape == (m, m), f"T is {model.T.shape}, expected {(m, m)}")
    chk(model.R.shape == (m, r), f"R is {model.R.shape}, expected {(m, r)}")
    chk(model.Q.mat.shape == (r, r), f"Q is {model.Q.mat.shape}, expected {(r, r)}")
    chk(model.c.shape == (m, 1), f"c is {model.c.shape}, expected {(m, 1)}")
    chk(model.a1.shape == (m, 1), f"a1 is {model.a1.shape}, expected {(m, 1)}")
    chk(model.P1.shape == (m, m), f"P1 is {model.P1.shape}, expected {(m, m)}")

    P1 = model.P1.mat
    if P1.shape == (m, m):
        off = ~np.eye(m, dtype=bool)
        if np.any(np.isinf(P1[off])):
            out.append("P1 has an infinite off-diagonal entry (diffuse elements are diagonal only)")
        fin = P1.copy()
        fin[np.isinf(fin)] = 0.0
        if not np.allclose(fin, fin.T, atol=1e-10):
            out.append("P1 finite part is not symmetric")
        else:
            eig = np.linalg.eigvalsh((fin + fin.T) / 2)
            if eig.size and eig.min() < -1e-8 * max(1.0, abs(eig).max()):
                out.append("P1 finite part is not positive semidefinite")

    for nm, comp in (("Z", model.Z), ("T", model.T), ("R", model.R),
                     ("c", model.c), ("H", model.H.mat), ("Q", model.Q.mat)):
        if np.any(comp.mmask & comp.dmmask):
            out.append(f"{nm} has a cell flagged both stationary-variable and dynamic")

    for comp in model.components:
        if comp.start < 0 or comp.stop > m or comp.start > comp.stop:
            out.append(f"component '{comp.name}' span [{comp.start}, {comp.stop}) outside state vector")

    for s in model.H.specs:
        if s.rows.size != p:
            out.append("an H non-Gaussian spec mask does not have length p")
    for s in model.Q.specs:
        if s.rows.size != r:
            out.append("a Q non-Gaussian spec mask does not have length r")
    return out
