"""Bayesian structural VARs with sparse heterogeneous Markov-switching
heteroskedasticity: Gibbs estimation, homoskedasticity verification through
Savage-Dickey ratios, structural analysis, Monte Carlo harnesses, and
recursive forecast evaluation."""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericalError
from .estimator import MarkovSwitchingSVAR
from .gibbs import SamplerConfig, run_sampler
from .model import (ParameterState, PosteriorSample, PriorSpec, TimeSeriesData,
                    VolatilitySpec, build_regressors)

__all__ = [
    "ConfigError", "DataError", "NumericalError",
    "MarkovSwitchingSVAR",
    "SamplerConfig", "run_sampler",
    "ParameterState", "PosteriorSample", "PriorSpec", "TimeSeriesData",
    "VolatilitySpec", "build_regressors",
    "__version__",
]
