"""Global analysis settings with per-call overrides."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

__all__ = ["Options", "setopt", "resolve_options"]


@dataclass(frozen=True)
class Options:
    """Analysis settings shared by filtering, smoothing and estimation.

    ``tolerance`` drives the filter's zero thresholds; ``tol`` is the
    optimizer's stopping tolerance on objective change; ``nsamp`` is the
    importance-sample count; ``diffuse_kappa`` replaces infinite prior
    variances where sampling needs a proper distribution.
    """

    tolerance: float = 1e-8
    inversion_method: str = "fixed"
    fmin: str = "simplex"
    tol: float = 1e-6
    maxiter: int = 500
    disp: str = "off"
    nsamp: int = 500
    diffuse_kappa: float = 1e7

    def __post_init__(self):
        if self.inversion_method != "fixed":
            raise ValueError("only the fixed inversion method is supported")
        if self.fmin not in ("simplex", "bfgs"):
            raise ValueError("fmin must be 'simplex' or 'bfgs'")
        if self.disp not in ("off", "notify", "final", "iter"):
            raise ValueError("disp must be one of off/notify/final/iter")


_GLOBAL = Options()


def setopt(**kwargs) -> Options:
    """Update the global defaults; with no arguments returns them unchanged."""
    global _GLOBAL
    if kwargs:
        _GLOBAL = replace(_GLOBAL, **kwargs)
    return _GLOBAL


def resolve_options(opts=None, **overrides) -> Options:
    """One-time overrides on top of the globals; never mutates them."""
    base = _GLOBAL if opts is None else opts
    if isinstance(base, dict):
        base = replace(_GLOBAL, **base)
    return replace(base, **{k: v for k, v in overrides.items() if v is not None})
