"""Scikit-learn style front end.

``MarkovSwitchingSVAR`` wraps regressor construction, the Gibbs sampler and
the post-sampling tools behind the familiar ``fit`` / ``predict`` / ``score``
surface (with ``get_params`` / ``set_params`` via ``BaseEstimator``), so the
model slots into ecosystem tooling. The functional modules remain the primary
API for anything beyond the common path.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import forecast, inference
from .errors import DataError
from .gibbs import SamplerConfig, run_sampler
from .model import PriorSpec, TimeSeriesData, VolatilitySpec, build_regressors
from .validation import as_matrix


class MarkovSwitchingSVAR(BaseEstimator):
    """Bayesian structural VAR with Markov-switching shock variances.

    Parameters
    ----------
    lags : autoregressive order p (0 gives the pure structural model).
    deterministic : "const" for an intercept, None for no deterministic terms.
    volatility : "hmsh" (one regime process per shock), "msh" (shared process)
        or "exh" (fixed schedule given by ``breakpoints``).
    regimes : regimes per process (ignored for "exh").
    sparse : overfitting regime count with zero occupancy allowed; otherwise
        the stationary three-observation rule applies during sampling.
    breakpoints : 0-based indices where a new exogenous regime starts.
    draws, burn_in, thinning, seed : chain settings (burn_in None = half).
    nonstationary : bool or per-variable sequence driving the unit-root prior
        mean of the first own lag.
    prior : optional PriorSpec overriding the default hierarchy.
    """

    def __init__(self, lags=1, deterministic="const", volatility="hmsh", regimes=2,
                 sparse=False, breakpoints=(), draws=2000, burn_in=None, thinning=1,
                 seed=0, nonstationary=True, prior=None):
        self.lags = lags
        self.deterministic = deterministic
        self.volatility = volatility
        self.regimes = regimes
        self.sparse = sparse
        self.breakpoints = breakpoints
        self.draws = draws
        self.burn_in = burn_in
        self.thinning = thinning
        self.seed = seed
        self.nonstationary = nonstationary
        self.prior = prior

    def _spec(self) -> VolatilitySpec:
        return VolatilitySpec(self.volatility, regimes=self.regimes, sparse=self.sparse,
                              breakpoints=tuple(self.breakpoints))

    def fit(self, X, y=None):
        """Estimate the posterior on a T x N panel.

        Stores the raw panel, the assembled regressors, the prior and the
        posterior sample as fitted attributes.
        """
        raw = as_matrix(X, "X")
        self.raw_ = raw.copy()
        self.data_ = build_regressors(raw, self.lags, self.deterministic)
        self.prior_ = self.prior if self.prior is not None else PriorSpec.default(
            self.data_.n_vars, self.lags,
            self.data_.deterministic_count, self.nonstationary)
        config = SamplerConfig(total_draws=self.draws, burn_in=self.burn_in,
                               thinning=self.thinning, seed=self.seed)
        self.posterior_ = run_sampler(self.data_, self._spec(), self.prior_, config)
        return self

    def _check_fitted(self):
        if not hasattr(self, "posterior_"):
            raise DataError("estimator is not fitted; call fit(X) first")

    def _continued_data(self, X=None) -> TimeSeriesData:
        if X is None:
            return self.data_
        cont = as_matrix(X, "X")
        if cont.shape[1] != self.raw_.shape[1]:
            raise DataError("continuation sample has a different variable count")
        return build_regressors(np.vstack([self.raw_, cont]), self.lags, self.deterministic)

    def predict(self, X=None) -> np.ndarray:
        """Posterior-mean one-step-ahead forecast.

        With ``X=None`` the forecast follows the training sample; an (H, N)
        continuation returns the sequence of one-step means along it (filter
        updates only, no re-estimation).
        """
        self._check_fitted()
        if X is None:
            horizon = 1
            full = self._continued_data(np.zeros((1, self.raw_.shape[1])))
        else:
            horizon = np.asarray(X).shape[0]
            full = self._continued_data(X)
        start = self.data_.n_obs - 1
        out = np.empty((horizon, full.n_vars))
        for h in range(horizon):
            dens = forecast.predictive_density(self.posterior_, full, start + h)
            out[h] = dens.mean()
        return out

    def score(self, X, y=None) -> float:
        """Mean one-step-ahead log predictive density of a continuation panel
        (higher is better); the posterior stays fixed, regime filters update."""
        self._check_fitted()
        cont = as_matrix(X, "X")
        full = self._continued_data(cont)
        start = self.data_.n_obs - 1
        scores = [forecast.predictive_density(self.posterior_, full, start + h)
                  .logpdf(cont[h]) for h in range(cont.shape[0])]
        return float(np.mean(scores))

    # ------------------------------------------------------------------
    # post-sampling conveniences

    def homoskedasticity_sddr(self, shock: int) -> inference.SddrResult:
        self._check_fitted()
        return inference.compute_sddr(self.posterior_, self.data_, self.prior_, shock)

    def normalized_posterior(self, reference=None):
        self._check_fitted()
        return inference.normalize_draws(self.posterior_, reference)

    def impulse_responses(self, horizon: int, level: float = 0.9) -> np.ndarray:
        """(H+1, N, N, 3) mean and HPD band, from the normalised posterior."""
        self._check_fitted()
        return inference.irf_summary(self.normalized_posterior(), horizon,
                                     self.lags, level)

    def fevd_impact_mean(self) -> np.ndarray:
        self._check_fitted()
        sample = self.normalized_posterior()
        return np.mean([inference.fevd_impact(d) for d in sample.draws], axis=0)

    def conditional_sd(self, shock: int, level: float = 0.9) -> np.ndarray:
        self._check_fitted()
        return inference.conditional_sd_path(self.posterior_, shock, level)
