"""Model parameters: named values, domain transforms, grouping, concatenation.

Optimization routines work on an unconstrained vector ``psi``; the model sees
the untransformed values (``param``).  Transforms are attached per group:

====================  =========================================================
``"1/2 log"``         variance, sigma2 = exp(2 psi)
``"log"``             positive scalar, x = exp(psi)
``"identity"``        unrestricted
``"arma"``            AR coefficients of 1 - c1 B - ... constrained to the
                      stationary region via tanh partial coefficients and the
                      Durbin-Levinson recursion (one group per polynomial)
``"ma"``              MA coefficients of 1 + t1 B + ... constrained to the
                      invertible region (same mapping on the negated values)
``"df"``              t degrees of freedom, nu = 2 + exp(psi)
``"logit01"``         value in (0, 1), logistic
``"logit0pi"``        value in (0, pi), scaled logistic
``"cov"``             full covariance: p variances then p(p-1)/2 covariances
                      in column-major lower-triangle order, PSD via Cholesky
====================  =========================================================
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ParamSet", "DomainError", "pacf_to_ar", "ar_to_pacf"]


class DomainError(ValueError):
    """Parameter value outside its transform's domain."""


def pacf_to_ar(partials: np.ndarray) -> np.ndarray:
    """Map partial coefficients in (-1,1) to coefficients a with
    1 - a_1 B - ... - a_k B^k stationary (Durbin-Levinson)."""
    r = np.asarray(partials, dtype=float)
    a = np.zeros(0)
    for k in range(r.size):
        prev = a
        a = np.empty(k + 1)
        a[k] = r[k]
        a[:k] = prev - r[k] * prev[::-1]
    return a


def ar_to_pacf(coef: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pacf_to_ar`; raises if outside the stationary region."""
    a = np.asarray(coef, dtype=float).copy()
    k = a.size
    r = np.zeros(k)
    for j in range(k - 1, -1, -1):
        r[j] = a[j]
        if abs(r[j]) >= 1.0:
            raise DomainError("coefficients outside the stationary region")
        if j > 0:
            prev = a[:j]
            a = (prev + r[j] * prev[::-1]) / (1.0 - r[j] ** 2)
    return r


def _cov_dim(k: int) -> int:
    # k = p(p+1)/2 -> p
    p = int((np.sqrt(8 * k + 1) - 1) / 2)
    if p * (p + 1) // 2 != k:
        raise ValueError(f"group size {k} is not p(p+1)/2 for any p")
    return p


def _cov_unpack(values: np.ndarray) -> np.ndarray:
    p = _cov_dim(values.size)
    S = np.zeros((p, p))
    S[np.diag_indices(p)] = values[:p]
    iu = np.tril_indices(p, -1)
    # column-major lower-triangle order
    order = np.lexsort((iu[0], iu[1]))
    S[iu[0][order], iu[1][order]] = values[p:]
    S = S + np.tril(S, -1).T
    return S


def _cov_pack(S: np.ndarray) -> np.ndarray:
    p = S.shape[0]
    iu = np.tril_indices(p, -1)
    order = np.lexsort((iu[0], iu[1]))
    return np.concatenate([np.diag(S), S[iu[0][order], iu[1][order]]])


def _to_psi(code: str, values: np.ndarray, name: str) -> np.ndarray:
    if code == "identity":
        return values.copy()
    if code == "1/2 log":
        if np.any(values <= 0):
            raise DomainError(f"variance parameter '{name}' must be positive")
        return 0.5 * np.log(values)
    if code == "log":
        if np.any(values <= 0):
            raise DomainError(f"parameter '{name}' must be positive")
        return np.log(values)
    if code == "df":
        if np.any(values <= 2):
            raise DomainError(f"degrees of freedom '{name}' must exceed 2")
        return np.log(values - 2.0)
    if code == "logit01":
        if np.any((values <= 0) | (values >= 1)):
            raise DomainError(f"parameter '{name}' must lie in (0, 1)")
        return np.log(values / (1.0 - values))
    if code == "logit0pi":
        x = values / np.pi
        if np.any((x <= 0) | (x >= 1)):
            raise DomainError(f"parameter '{name}' must lie in (0, pi)")
        return np.log(x / (1.0 - x))
    if code == "arma":
        try:
            return np.arctanh(ar_to_pacf(values))
        except DomainError:
            raise DomainError(f"polynomial '{name}' outside the stationary region")
    if code == "ma":
        try:
            return np.arctanh(ar_to_pacf(-values))
        except DomainError:
            raise DomainError(f"polynomial '{name}' outside the invertible region")
    if code == "cov":
        S = _cov_unpack(values)
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise DomainError(f"covariance group '{name}' is not positive definite")
        p = S.shape[0]
        psi = np.zeros(values.size)
        psi[:p] = np.log(np.diag(L))
        iu = np.tril_indices(p, -1)
        order = np.lexsort((iu[0], iu[1]))
        psi[p:] = L[iu[0][order], iu[1][order]]
        return psi
    raise ValueError(f"unknown transform '{code}'")


def _from_psi(code: str, psi: np.ndarray) -> np.ndarray:
    if code == "identity":
        return psi.copy()
    if code == "1/2 log":
        return np.exp(2.0 * psi)
    if code == "log":
        return np.exp(psi)
    if code == "df":
        return 2.0 + np.exp(psi)
    if code == "logit01":
        return 1.0 / (1.0 + np.exp(-psi))
    if code == "logit0pi":
        return np.pi / (1.0 + np.exp(-psi))
    if code == "arma":
        return pacf_to_ar(np.tanh(psi))
    if code == "ma":
        return -pacf_to_ar(np.tanh(psi))
    if code == "cov":
        p = _cov_dim(psi.size)
        L = np.zeros((p, p))
        L[np.diag_indices(p)] = np.exp(psi[:p])
        iu = np.tril_indices(p, -1)
        order = np.lexsort((iu[0], iu[1]))
        L[iu[0][order], iu[1][order]] = psi[p:]
        return _cov_pack(L @ L.T)
    raise ValueError(f"unknown transform '{code}'")


@dataclass(frozen=True)
class ParamSet:
    """Named parameters partitioned into contiguous transform groups.

    ``groups`` is a tuple of (size, transform-code) pairs covering all
    parameters in order.  ``values`` holds untransformed values.
    """

    names: tuple
    values: np.ndarray
    groups: tuple

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel().copy())
        groups = tuple((int(k), str(code)) for k, code in self.groups)
        object.__setattr__(self, "groups", groups)
        if sum(k for k, _ in groups) != self.w:
            raise ValueError("groups do not partition the parameter vector")
        if len(self.names) != self.w:
            raise ValueError("one name per parameter required")

    @classmethod
    def empty(cls) -> "ParamSet":
        return cls((), np.zeros(0), ())

    @classmethod
    def simple(cls, names, transform: str, values=None) -> "ParamSet":
        """Elementwise transform: every parameter its own group."""
        names = tuple(names)
        vals = np.zeros(len(names)) if values is None else np.asarray(values, float)
        return cls(names, vals, tuple((1, transform) for _ in names))

    @property
    def w(self) -> int:
        return self.values.size

    def _group_slices(self):
        out, i = [], 0
        for k, code in self.groups:
            out.append((slice(i, i + k), code))
            i += k
        return out

    @property
    def psi(self) -> np.ndarray:
        """Unconstrained (transformed) parameter vector."""
        out = np.zeros(self.w)
        for sl, code in self._group_slices():
            out[sl] = _to_psi(code, self.values[sl], ", ".join(self.names[sl]))
        return out

    def with_psi(self, psi: np.ndarray) -> "ParamSet":
        psi = np.asarray(psi, dtype=float).ravel()
        if psi.size != self.w:
            raise ValueError(f"psi has length {psi.size}, expected {self.w}")
        vals = np.zeros(self.w)
        for sl, code in self._group_slices():
            vals[sl] = _from_psi(code, psi[sl])
        return ParamSet(self.names, vals, self.groups)

    def with_values(self, values: np.ndarray) -> "ParamSet":
        values = np.asarray(values, dtype=float).ravel()
        if values.size != self.w:
            raise ValueError(f"got {values.size} values, expected {self.w}")
        ps = ParamSet(self.names, values, self.groups)
        ps.psi  # domain check
        return ps

    @staticmethod
    def concat(sets) -> tuple["ParamSet", list]:
        """Concatenate ParamSets; returns the combined set and per-source
        boolean masks into the combined vector.  Colliding names get a
        1-based source index suffix."""
        sets = list(sets)
        names, values, groups, pmasks = [], [], [], []
        total = sum(s.w for s in sets)
        at = 0
        for idx, s in enumerate(sets):
            mask = np.zeros(total, dtype=bool)
            mask[at : at + s.w] = True
            pmasks.append(mask)
            names.extend(s.names)
            values.append(s.values)
            groups.extend(s.groups)
            at += s.w
        seen = {}
        final = []
        counts = {}
        for n in names:
            counts[n] = counts.get(n, 0) + 1
        src = []
        for idx, s in enumerate(sets):
            src.extend([idx + 1] * s.w)
        for n, k in zip(names, src):
            final.append(f"{n} ({k})" if counts[n] > 1 else n)
        vals = np.concatenate(values) if values else np.zeros(0)
        return ParamSet(tuple(final), vals, tuple(groups)), pmasks
