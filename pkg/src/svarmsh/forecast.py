"""Recursive expanding-window forecast evaluation.

The one-step-ahead predictive density of each posterior draw is the exact
finite regime mixture: regime probabilities at the forecast date are the
filtered probabilities at the origin pushed one step through the transition
matrix, and conditional on a draw the shocks factorise, so the joint density
is |det B0| times a product of per-shock scale mixtures. The predictive
density of the model is the equal-weight mixture of these over draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from .errors import NumericalError
from .gibbs import SamplerConfig, regime_logliks, run_sampler
from .markov import forward_filter
from .model import (ParameterState, PosteriorSample, PriorSpec, TimeSeriesData,
                    VolatilitySpec, structural_residuals)

_LN_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class PredictiveDensity:
    """Mixture-over-draws one-step-ahead density of y at a fixed origin.

    ``regime_probs[s][i]`` holds process i's predicted regime distribution at
    the forecast date under draw s.
    """

    means: np.ndarray              # (S, N) conditional means A x_{t+1}
    b0: np.ndarray                 # (S, N, N)
    variances: np.ndarray          # (S, N, M)
    regime_probs: np.ndarray       # (S, n_proc, M)
    heterogeneous: bool            # per-shock processes vs one shared process

    def logpdf(self, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float)
        n_draws, n_vars = self.means.shape
        logs = np.empty(n_draws)
        for s in range(n_draws):
            b0 = self.b0[s]
            sign, logdet = np.linalg.slogdet(b0)
            if sign == 0:
                raise NumericalError("singular B0 in a predictive draw")
            u = b0 @ (y - self.means[s])
            total = logdet
            for n in range(n_vars):
                probs = self.regime_probs[s, n if self.heterogeneous else 0]
                sig2 = self.variances[s, n]
                comp = -0.5 * (_LN_2PI + np.log(sig2) + u[n] ** 2 / sig2)
                with np.errstate(divide="ignore"):
                    total += logsumexp(comp, b=probs)
            logs[s] = total
        return float(logsumexp(logs) - np.log(n_draws))

    def mean(self) -> np.ndarray:
        return self.means.mean(axis=0)


def predictive_density(sample: PosteriorSample, data: TimeSeriesData,
                       origin: int) -> PredictiveDensity:
    """Exact one-step predictive density at ``origin`` (forecasting row
    origin+1 of ``data``).

    ``sample`` must have been estimated on ``data.head(origin + 1)``; rows up
    to the origin drive the regime filter, row origin+1 of ``x`` supplies the
    regressors (it only contains values observed by the origin).
    """
    if len(sample) == 0:
        raise ValueError("posterior sample is empty")
    if not 0 <= origin < data.n_obs - 1:
        raise ValueError(f"origin {origin} leaves no forecast row in the sample")
    vol = sample.volatility
    if vol is None:
        raise ValueError("posterior sample lacks its volatility specification")

    window = data.head(origin + 1)
    x_next = data.x[origin + 1]
    first = sample.draws[0]
    n_proc, regimes = first.paths.shape[0], first.n_regimes

    n_draws = len(sample)
    means = np.empty((n_draws, first.n_vars))
    b0 = np.empty((n_draws, first.n_vars, first.n_vars))
    variances = np.empty((n_draws, first.n_vars, regimes))
    regime_probs = np.empty((n_draws, n_proc, regimes))

    exh_regime = None
    if vol.variant == "exh":
        exh_regime = int(vol.exh_path(origin + 2)[-1])

    for s, draw in enumerate(sample.draws):
        means[s] = draw.a @ x_next if draw.a.shape[1] else 0.0
        b0[s] = draw.b0
        variances[s] = draw.variances
        if exh_regime is not None:
            regime_probs[s] = 0.0
            regime_probs[s, :, exh_regime] = 1.0
            continue
        resid = structural_residuals(window, draw)
        for i in range(n_proc):
            if vol.variant == "hmsh":
                logliks = regime_logliks(resid[:, i], draw.variances[i])
            else:
                logliks = sum(regime_logliks(resid[:, n], draw.variances[n])
                              for n in range(draw.n_vars))
            filt, _ = forward_filter(logliks, draw.transitions[i], draw.initials[i])
            regime_probs[s, i] = filt[-1] @ draw.transitions[i]

    return PredictiveDensity(means=means, b0=b0, variances=variances,
                             regime_probs=regime_probs,
                             heterogeneous=vol.variant == "hmsh")


# ---------------------------------------------------------------------------
# recursive evaluation


@dataclass
class ForecastReport:
    """Aggregated scores plus the per-origin traces used to diagnose episodes.

    ``summary`` carries, per model: mean log predictive score, per-variable
    RMSFE/MAFE averages, and the comparison columns against the benchmark
    (LPS difference; RMSFE/MAFE ratios averaged over variables after
    per-variable standardisation by the benchmark).
    """

    summary: pd.DataFrame
    log_scores: pd.DataFrame       # origins x models
    point_errors: dict[str, pd.DataFrame]  # model -> origins x variables
    benchmark: str
    skipped: list[tuple] = field(default_factory=list)

    def to_csv(self, out_dir, prefix: str = "forecast_") -> list[str]:
        from pathlib import Path
        written = []
        for name, frame in [("summary", self.summary), ("log_scores", self.log_scores)]:
            path = Path(out_dir) / f"{prefix}{name}.csv"
            frame.to_csv(path, float_format="%.10g")
            written.append(str(path))
        for model, frame in self.point_errors.items():
            path = Path(out_dir) / f"{prefix}errors_{model}.csv"
            frame.to_csv(path, float_format="%.10g")
            written.append(str(path))
        return written


def _extend_state(state: ParameterState, vol: VolatilitySpec, n_obs: int) -> ParameterState:
    """Warm start for the next origin: lengthen the regime paths by carrying
    the last regime forward (exogenous schedules are recomputed)."""
    new = state.copy()
    extra = n_obs - state.paths.shape[1]
    if extra > 0:
        if vol.variant == "exh":
            new.paths = np.tile(vol.exh_path(n_obs), (state.paths.shape[0], 1))
        else:
            tail = np.repeat(state.paths[:, -1:], extra, axis=1)
            new.paths = np.concatenate([state.paths, tail], axis=1)
    return new


def evaluate(model_specs: dict[str, VolatilitySpec], data: TimeSeriesData,
             first_origin: int, benchmark: str, prior: PriorSpec | None = None,
             draws_per_origin: int = 600, burn_in: int | None = None,
             seed: int = 0) -> ForecastReport:
    """Expanding-window, one-step-ahead comparison of volatility models.

    Each model is re-estimated at every origin (warm-started from the previous
    one) on data up to the origin, then scores the next observation. Origins
    where estimation fails are skipped for that model and flagged.
    """
    if benchmark not in model_specs:
        raise ValueError(f"benchmark {benchmark!r} must be one of the evaluated models")
    if not 0 < first_origin < data.n_obs - 1:
        raise ValueError("first_origin leaves no evaluation point")
    if prior is None:
        prior = PriorSpec.default(data.n_vars, data.lag_order, data.deterministic_count)

    origins = list(range(first_origin, data.n_obs - 1))
    log_scores = pd.DataFrame(index=origins, columns=list(model_specs), dtype=float)
    point_errors = {m: pd.DataFrame(index=origins,
                                    columns=[f"var{j}" for j in range(data.n_vars)],
                                    dtype=float)
                    for m in model_specs}
    skipped = []

    for mi, (name, vol) in enumerate(model_specs.items()):
        warm = None
        for origin in origins:
            window = data.head(origin + 1)
            config = SamplerConfig(total_draws=draws_per_origin, burn_in=burn_in,
                                   seed=seed + 7919 * mi)
            try:
                init = _extend_state(warm, vol, window.n_obs) if warm is not None else None
                sample = run_sampler(window, vol, prior, config, init_state=init)
                warm = sample.draws[-1]
                dens = predictive_density(sample, data, origin)
                actual = data.y[origin + 1]
                log_scores.loc[origin, name] = dens.logpdf(actual)
                point_errors[name].loc[origin] = dens.mean() - actual
            except NumericalError as exc:
                skipped.append((name, origin, str(exc)))
                warm = None

    summary = summarize_scores(log_scores, point_errors, benchmark)
    return ForecastReport(summary=summary, log_scores=log_scores,
                          point_errors=point_errors, benchmark=benchmark,
                          skipped=skipped)


def summarize_scores(log_scores: pd.DataFrame, point_errors: dict[str, pd.DataFrame],
                     benchmark: str) -> pd.DataFrame:
    """Aggregate per-origin traces into the comparison table.

    LPS is the mean log predictive density and is compared by difference;
    RMSFE and MAFE are computed per variable, standardised by the benchmark's
    per-variable error, and the ratios averaged across variables.
    """
    rows = []
    bench_rmsfe = np.sqrt((point_errors[benchmark] ** 2).mean(axis=0))
    bench_mafe = point_errors[benchmark].abs().mean(axis=0)
    bench_lps = log_scores[benchmark].mean()
    for name in log_scores.columns:
        rmsfe = np.sqrt((point_errors[name] ** 2).mean(axis=0))
        mafe = point_errors[name].abs().mean(axis=0)
        lps = log_scores[name].mean()
        rows.append({
            "model": name,
            "lps": lps,
            "rmsfe": float(rmsfe.mean()),
            "mafe": float(mafe.mean()),
            "lps_diff": lps - bench_lps,
            "rmsfe_ratio": float((rmsfe / bench_rmsfe).mean()),
            "mafe_ratio": float((mafe / bench_mafe).mean()),
            "n_origins": int(log_scores[name].notna().sum()),
        })
    return pd.DataFrame(rows).set_index("model")
