"""Dynamic state-space matrices: a stationary base plus per-time overrides.

A ``DynamicMatrix`` is a matrix whose value at time t is the stationary base
``mat`` with the cells flagged in ``dmmask`` overwritten, in column-major
order, by column t of ``dvec``.  ``mmask`` flags the stationary cells that
depend on model parameters and ``dvmask`` flags the parameter-dependent rows
of ``dvec``.  All masked-cell vectors follow column-major (Fortran) cell
order throughout the package, including update-function outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DynamicMatrix",
    "mask_get",
    "mask_set",
    "hcat",
    "vcat",
    "blockdiag",
]


def mask_get(mat: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Masked cells of ``mat`` as a vector, column-major order."""
    return mat.T[mask.T]


def mask_set(mat: np.ndarray, mask: np.ndarray, vec: np.ndarray) -> None:
    """Write ``vec`` into the masked cells of ``mat``, column-major order."""
    mT = mat.T
    mT[mask.T] = vec


def _as_bool(mask, shape) -> np.ndarray:
    if mask is None:
        return np.zeros(shape, dtype=bool)
    out = np.asarray(mask, dtype=bool)
    if out.shape != tuple(shape):
        raise ValueError(f"mask shape {out.shape} does not match {tuple(shape)}")
    return out


@dataclass(frozen=True)
class DynamicMatrix:
    """Stationary base + dynamic overrides + parameter-variable masks.

    Treat instances as immutable: updates go through :meth:`with_values`
    or :meth:`with_dvec`, which return new objects.
    """

    mat: np.ndarray
    mmask: np.ndarray = None
    dmmask: np.ndarray = None
    dvec: np.ndarray = None
    dvmask: np.ndarray = None

    def __post_init__(self):
        mat = np.array(self.mat, dtype=float, ndmin=2)
        object.__setattr__(self, "mat", mat)
        object.__setattr__(self, "mmask", _as_bool(self.mmask, mat.shape))
        object.__setattr__(self, "dmmask", _as_bool(self.dmmask, mat.shape))
        k = int(self.dmmask.sum())
        if self.dvec is None:
            dvec = np.zeros((k, 1))
        else:
            dvec = np.array(self.dvec, dtype=float, ndmin=2)
        if dvec.shape[0] != k:
            raise ValueError(f"dvec has {dvec.shape[0]} rows for {k} dynamic cells")
        object.__setattr__(self, "dvec", dvec)
        if self.dvmask is None:
            dvmask = np.zeros(k, dtype=bool)
        else:
            dvmask = np.asarray(self.dvmask, dtype=bool).reshape(k)
        object.__setattr__(self, "dvmask", dvmask)
        if np.any(self.mmask & self.dmmask):
            raise ValueError("a cell cannot be both stationary-variable and dynamic")

    # -- basic queries ---------------------------------------------------
    @property
    def shape(self):
        return self.mat.shape

    @property
    def n(self) -> int:
        """Number of time points carried by the dynamic part (1 if stationary)."""
        return 1 if self.dvec.shape[0] == 0 else self.dvec.shape[1]

    @property
    def stationary(self) -> bool:
        return self.dmmask.sum() == 0

    @property
    def const(self) -> bool:
        return not (self.mmask.any() or self.dvmask.any())

    @property
    def n_var(self) -> int:
        """Count of parameter-variable stationary cells."""
        return int(self.mmask.sum())

    @property
    def n_dvar(self) -> int:
        """Count of parameter-variable dynamic rows."""
        return int(self.dvmask.sum())

    # -- evaluation ------------------------------------------------------
    def at(self, t: int) -> np.ndarray:
        """Matrix value at 0-based time ``t``; clamps past the last column."""
        out = self.mat.copy()
        if not self.stationary:
            tt = min(max(t, 0), self.dvec.shape[1] - 1)
            mask_set(out, self.dmmask, self.dvec[:, tt])
        return out

    def realize(self, n: int) -> np.ndarray:
        """Values for t = 0..n-1 stacked as (n, R, C) (or (1, R, C) if stationary)."""
        if self.stationary:
            return self.mat[None, :, :].copy()
        out = np.repeat(self.mat[None, :, :], n, axis=0)
        idx = np.minimum(np.arange(n), self.dvec.shape[1] - 1)
        cols, rows = np.nonzero(self.dmmask.T)
        out[:, rows, cols] = self.dvec[:, idx].T
        return out

    # -- updates (copy-on-write) ------------------------------------------
    def with_values(self, vec: np.ndarray) -> "DynamicMatrix":
        """New matrix with the variable stationary cells set to ``vec``."""
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.size != self.n_var:
            raise ValueError(f"expected {self.n_var} stationary values, got {vec.size}")
        mat = self.mat.copy()
        mask_set(mat, self.mmask, vec)
        return DynamicMatrix(mat, self.mmask, self.dmmask, self.dvec, self.dvmask)

    def with_dvec(self, rows: np.ndarray) -> "DynamicMatrix":
        """New matrix with the variable dynamic rows set to ``rows``."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[0] != self.n_dvar:
            raise ValueError(f"expected {self.n_dvar} dynamic rows, got {rows.shape[0]}")
        dvec = self.dvec.copy()
        if rows.shape[1] not in (1, dvec.shape[1]):
            raise ValueError(
                f"dynamic update has {rows.shape[1]} columns, matrix carries {dvec.shape[1]}"
            )
        dvec[self.dvmask, :] = rows
        return DynamicMatrix(self.mat, self.mmask, self.dmmask, dvec, self.dvmask)

    def equals(self, other: "DynamicMatrix") -> bool:
        return (
            np.array_equal(self.mat, other.mat)
            and np.array_equal(self.mmask, other.mmask)
            and np.array_equal(self.dmmask, other.dmmask)
            and np.array_equal(self.dvec, other.dvec)
            and np.array_equal(self.dvmask, other.dvmask)
        )


def _combine(parts, offsets, shape, n_out):
    """Shared concatenation core: place each part's block at its offset."""
    mat = np.zeros(shape)
    mmask = np.zeros(shape, dtype=bool)
    dmmask = np.zeros(shape, dtype=bool)
    for part, (r0, c0) in zip(parts, offsets):
        r, c = part.shape
        mat[r0 : r0 + r, c0 : c0 + c] = part.mat
        mmask[r0 : r0 + r, c0 : c0 + c] = part.mmask
        dmmask[r0 : r0 + r, c0 : c0 + c] = part.dmmask
    # Combined dvec rows must follow the F-order of the combined dmmask, which
    # need not be the simple stack of the parts' dvecs (e.g. vertical concat
    # interleaves cells within a column), so rank every cell explicitly.
    flat_rank = {}
    cols, rows = np.nonzero(dmmask.T)
    for rank, (cc, rr) in enumerate(zip(cols, rows)):
        flat_rank[(rr, cc)] = rank
    dvec = np.zeros((int(dmmask.sum()), n_out))
    dvmask = np.zeros(int(dmmask.sum()), dtype=bool)
    for part, (r0, c0) in zip(parts, offsets):
        if part.stationary:
            continue
        pc, pr = np.nonzero(part.dmmask.T)
        vals = part.dvec
        idx = np.minimum(np.arange(n_out), vals.shape[1] - 1)
        for k, (cc, rr) in enumerate(zip(pc, pr)):
            rank = flat_rank[(rr + r0, cc + c0)]
            dvec[rank, :] = vals[k, idx]
            dvmask[rank] = part.dvmask[k]
    return DynamicMatrix(mat, mmask, dmmask, dvec, dvmask)


def _norm(parts):
    return [p if isinstance(p, DynamicMatrix) else DynamicMatrix(p) for p in parts]


def hcat(*parts) -> DynamicMatrix:
    parts = _norm(parts)
    rows = parts[0].shape[0]
    if any(p.shape[0] != rows for p in parts):
        raise ValueError("row mismatch in horizontal concatenation")
    n_out = max(p.n for p in parts)
    offsets, c0 = [], 0
    for p in parts:
        offsets.append((0, c0))
        c0 += p.shape[1]
    return _combine(parts, offsets, (rows, c0), n_out)


def vcat(*parts) -> DynamicMatrix:
    parts = _norm(parts)
    cols = parts[0].shape[1]
    if any(p.shape[1] != cols for p in parts):
        raise ValueError("column mismatch in vertical concatenation")
    n_out = max(p.n for p in parts)
    offsets, r0 = [], 0
    for p in parts:
        offsets.append((r0, 0))
        r0 += p.shape[0]
    return _combine(parts, offsets, (r0, cols), n_out)


def blockdiag(*parts) -> DynamicMatrix:
    parts = _norm(parts)
    n_out = max(p.n for p in parts) if parts else 1
    offsets, r0, c0 = [], 0, 0
    for p in parts:
        offsets.append((r0, c0))
        r0 += p.shape[0]
        c0 += p.shape[1]
    return _combine(parts, offsets, (r0, c0), n_out)
