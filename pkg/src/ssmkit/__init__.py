"""ssmkit: state-space time series modeling toolkit.

Composable dynamic-matrix models, exact-diffuse Kalman filtering and
smoothing, simulation smoothing, maximum-likelihood estimation,
non-Gaussian approximation, and ARIMA decomposition/selection tools.
"""

from .data import TimeSeriesData, as_data
from .dynmat import DynamicMatrix, blockdiag, hcat, vcat
from .kalman import FilterResult, FilterSingularError, forecast, kalman_filter, loglik
from .model import (
    AdjacencyRow,
    Component,
    Disturbance,
    NonGaussianSpec,
    NonlinearUnsupportedError,
    StateSpaceModel,
    UpdateBinding,
    apply_updates,
    combine_additive,
    validate,
)
from .options import Options, setopt
from .params import DomainError, ParamSet
from .smoothing import (
    SmoothResult,
    batch_smooth,
    disturb_smooth,
    fast_state_smooth,
    sample,
    sim_smooth,
    signal,
    smooth_all,
    state_smooth,
)

__all__ = [
    "TimeSeriesData",
    "as_data",
    "DynamicMatrix",
    "blockdiag",
    "hcat",
    "vcat",
    "FilterResult",
    "FilterSingularError",
    "forecast",
    "kalman_filter",
    "loglik",
    "AdjacencyRow",
    "Component",
    "Disturbance",
    "NonGaussianSpec",
    "NonlinearUnsupportedError",
    "StateSpaceModel",
    "UpdateBinding",
    "apply_updates",
    "combine_additive",
    "validate",
    "Options",
    "setopt",
    "DomainError",
    "ParamSet",
    "SmoothResult",
    "batch_smooth",
    "disturb_smooth",
    "fast_state_smooth",
    "sample",
    "sim_smooth",
    "signal",
    "smooth_all",
    "state_smooth",
]

__version__ = "0.1.0"
