"""Observation data container with per-cell missing markers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TimeSeriesData", "as_data"]


@dataclass(frozen=True)
class TimeSeriesData:
    """p x n observation matrix; ``missing`` marks unobserved cells.

    Fully-missing columns are legal and drive pure prediction steps
    (forecasting appends them).  Non-missing values must be finite.
    """

    values: np.ndarray
    missing: np.ndarray = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, ndmin=2)
        if self.missing is None:
            miss = np.isnan(vals)
        else:
            miss = np.asarray(self.missing, dtype=bool)
            if miss.shape != vals.shape:
                raise ValueError("missing mask shape does not match values")
            miss = miss | np.isnan(vals)
        if vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError("data must be at least 1 x 1")
        if not np.all(np.isfinite(vals[~miss])):
            raise ValueError("non-missing observations must be finite")
        vals = vals.copy()
        vals[miss] = np.nan
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "missing", miss)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def observed(self) -> np.ndarray:
        return ~self.missing

    def extended(self, h: int) -> "TimeSeriesData":
        """Append ``h`` fully-missing columns (forecast-as-missing)."""
        pad = np.full((self.p, h), np.nan)
        return TimeSeriesData(np.hstack([self.values, pad]))


def as_data(y) -> TimeSeriesData:
    """Coerce arrays (NaN = missing) or pass TimeSeriesData through."""
    if isinstance(y, TimeSeriesData):
        return y
    return TimeSeriesData(np.array(y, dtype=float, ndmin=2))
