"""Posterior simulation by Gibbs sampling.

One sweep updates, in this fixed order: regime paths (forward filter,
backward sampler), transition matrices and initial probabilities, normalised
regime variances (via the inverse gamma-based Dirichlet full conditional),
the structural matrix B0 (generalised-normal row draws), the autoregressive
rows (equation-by-equation Gaussian conditionals under the structural
likelihood), and the two 3-level shrinkage hierarchies.

``likelihood_off=True`` removes every data term while keeping all parameter
couplings, so the chain targets the joint prior - the standard prior-
reproduction diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .distributions import ig2_rvs
from .errors import DataError, NumericalError
from .markov import (MarkovSpec, ffbs, meets_min_occupancy, sample_initial_probs,
                     sample_transition_matrix, simulate_chain)
from .model import (ParameterState, PosteriorSample, PriorSpec, TimeSeriesData,
                    VolatilitySpec)

_LN_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class SamplerConfig:
    """Chain-length and reproducibility settings.

    ``burn_in=None`` defaults to half of ``total_draws``.
    """

    total_draws: int
    burn_in: int | None = None
    thinning: int = 1
    seed: int = 0
    occupancy_retry_cap: int = 100

    def __post_init__(self):
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.total_draws // 2)
        if not (self.total_draws > self.burn_in >= 0):
            raise ValueError("need total_draws > burn_in >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")


# ---------------------------------------------------------------------------
# block updates


def regime_logliks(resid: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """(T, M) log N(u_t; 0, sigma2_m) for one shock's residual series."""
    s2 = variances[None, :]
    return -0.5 * (_LN_2PI + np.log(s2) + resid[:, None] ** 2 / s2)


def sample_paths(state: ParameterState, resid: np.ndarray, specs: list[MarkovSpec],
                 variant: str, rng: np.random.Generator, retry_cap: int = 100,
                 likelihood_off: bool = False) -> np.ndarray:
    """Redraw every regime path; returns per-process occupancy-failure flags.

    Stationary processes are redrawn until each regime keeps its minimum
    occupancy; after ``retry_cap`` failures the previous path is retained so
    the chain stays on the constrained support.
    """
    n_proc, t_obs = state.paths.shape
    regimes = state.n_regimes
    failures = np.zeros(n_proc, dtype=np.int64)
    for i in range(n_proc):
        spec = specs[i]
        if spec.kind == "exogenous":
            continue
        if likelihood_off:
            logliks = np.zeros((t_obs, regimes))
        elif variant == "hmsh":
            logliks = regime_logliks(resid[:, i], state.variances[i])
        else:  # common path drives every shock
            logliks = sum(regime_logliks(resid[:, n], state.variances[n])
                          for n in range(state.n_vars))
        accepted = False
        for _ in range(max(1, retry_cap)):
            path = ffbs(logliks, state.transitions[i], state.initials[i], rng)
            if meets_min_occupancy(path, regimes, spec.min_occupancy):
                state.paths[i] = path
                accepted = True
                break
        if not accepted:
            failures[i] = 1
    return failures


def sample_variances(resid_n: np.ndarray | None, path_n: np.ndarray, regimes: int,
                     prior: PriorSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw one shock's normalised regime variances.

    Independent IG2 draws with posterior-updated scale/shape per regime,
    normalised by their sum and rescaled by the regime count, so the draws
    average to exactly 1. Empty regimes keep the prior terms. ``resid_n=None``
    drops the data terms entirely (prior draw).
    """
    if resid_n is None:
        t_m = np.zeros(regimes)
        u_m = np.zeros(regimes)
    else:
        p = np.asarray(path_n, dtype=np.int64)
        t_m = np.bincount(p, minlength=regimes).astype(float)
        u_m = np.bincount(p, weights=np.asarray(resid_n) ** 2, minlength=regimes)
    z = ig2_rvs(prior.variance_scale + u_m, prior.variance_shape + t_m, rng)
    return regimes * z / z.sum()


def variance_posterior_params(resid_n: np.ndarray, path_n: np.ndarray, regimes: int,
                              prior: PriorSpec) -> tuple[np.ndarray, np.ndarray]:
    """Scale and shape vectors of the variance block's full conditional,
    as used both by :func:`sample_variances` and the homoskedasticity
    verification's posterior-ordinate average."""
    p = np.asarray(path_n, dtype=np.int64)
    t_m = np.bincount(p, minlength=regimes).astype(float)
    u_m = np.bincount(p, weights=np.asarray(resid_n) ** 2, minlength=regimes)
    return prior.variance_scale + u_m, prior.variance_shape + t_m


def _cofactor_vector(b0: np.ndarray, row: int) -> np.ndarray:
    """Cofactors of det(B0) along ``row``; depends only on the other rows."""
    n = b0.shape[0]
    if n == 1:
        return np.ones(1)
    others = [i for i in range(n) if i != row]
    cof = np.empty(n)
    for k in range(n):
        cols = [j for j in range(n) if j != k]
        cof[k] = (-1) ** (row + k) * np.linalg.det(b0[np.ix_(others, cols)])
    return cof


def sample_b0_row(n: int, b0: np.ndarray, moment: np.ndarray, kappa: float,
                  prior: PriorSpec, gamma_b_n: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Draw row n of B0 from its generalised-normal full conditional.

    ``moment`` is the heteroskedasticity-weighted data moment
    sum_t eps_t eps_t' / sigma2_{n,t} (zero matrix for a prior draw). The
    density along the determinant-sensitive direction is |w|^kappa exp(-w^2/2),
    sampled through a gamma draw for w^2 and a fair sign; the orthogonal
    components are standard normal.
    """
    v = prior.b_selector(n)
    n_vars = b0.shape[0]
    r = n_vars if v is None else v.shape[0]
    omega = prior.b_omega_row(n, r)
    if v is None:
        precision = np.linalg.inv(omega) / gamma_b_n + moment
        v_cof = _cofactor_vector(b0, n)
    else:
        precision = np.linalg.inv(omega) / gamma_b_n + v @ moment @ v.T
        v_cof = v @ _cofactor_vector(b0, n)
    try:
        low = cholesky(precision, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - upstream degeneracy
        raise NumericalError("B0 row conditional precision is not positive definite") from exc

    w_hat = solve_triangular(low, v_cof, lower=True)
    norm_w = np.linalg.norm(w_hat)
    if norm_w <= 0 or not np.isfinite(norm_w):
        raise NumericalError("degenerate data moment matrix in the B0 row draw")
    basis, _ = np.linalg.qr(w_hat.reshape(-1, 1), mode="complete")

    alpha = np.empty(r)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    alpha[0] = sign * np.sqrt(rng.gamma((kappa + 1.0) / 2.0, 2.0))
    if r > 1:
        alpha[1:] = rng.standard_normal(r - 1)
    eta = basis @ alpha
    b_free = solve_triangular(low.T, eta, lower=False)
    return b_free if v is None else b_free @ v


def sample_b0(data: TimeSeriesData | None, state: ParameterState, prior: PriorSpec,
              rng: np.random.Generator, sigma2: np.ndarray | None = None) -> np.ndarray:
    """Row-by-row Gibbs update of B0 (rows conditioned on the freshest values)."""
    n_vars = state.n_vars
    b0 = state.b0.copy()
    if data is None or data.n_obs == 0:
        t_obs = 0
        eps = None
    else:
        t_obs = data.n_obs
        eps = data.y - data.x @ state.a.T
        if sigma2 is None:
            sigma2 = state.sigma2_series()
    kappa = t_obs + prior.nu_b(n_vars) - n_vars
    for n in range(n_vars):
        if eps is None:
            moment = np.zeros((n_vars, n_vars))
        else:
            weighted = eps / sigma2[:, n][:, None]
            moment = eps.T @ weighted
        b0[n] = sample_b0_row(n, b0, moment, kappa, prior, state.gamma_b[n], rng)
    return b0


def sample_a_row(n: int, data: TimeSeriesData | None, state: ParameterState,
                 prior: PriorSpec, rng: np.random.Generator,
                 sigma2: np.ndarray | None = None) -> np.ndarray:
    """Draw row n of A from its Gaussian full conditional.

    Under the structural likelihood every structural equation involves all
    rows of A through B0, so the conditional for one row is formed given the
    current values of all other rows, with per-observation weights
    1 / sigma2_{j,t} aggregated across equations.
    """
    v = prior.a_selector(n)
    mu, omega = prior.a_row_moments(n)
    try:
        omega_chol = cholesky(omega, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("A-row prior scale is not positive definite") from exc
    prior_prec = cho_solve((omega_chol, True), np.eye(mu.size)) / state.gamma_a[n]

    if data is None or data.n_obs == 0:
        q = prior_prec
        rhs = prior_prec @ mu
    else:
        if sigma2 is None:
            sigma2 = state.sigma2_series()
        x_free = data.x if v is None else data.x @ v.T
        b_col = state.b0[:, n]
        eps_tilde = data.y - data.x @ state.a.T
        eps_tilde[:, n] = data.y[:, n]
        c = eps_tilde @ state.b0.T
        weights = (1.0 / sigma2) @ (b_col ** 2)
        h = (c / sigma2) @ b_col
        q = prior_prec + x_free.T @ (x_free * weights[:, None])
        rhs = prior_prec @ mu + x_free.T @ h

    try:
        low = cholesky(q, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("A-row posterior precision is not positive definite") from exc
    mean = cho_solve((low, True), rhs)
    a_free = mean + solve_triangular(low.T, rng.standard_normal(mu.size), lower=False)
    return a_free if v is None else a_free @ v


def _free_row(full_row: np.ndarray, selector: np.ndarray | None) -> np.ndarray:
    return full_row if selector is None else full_row @ selector.T


def sample_shrinkage(state: ParameterState, prior: PriorSpec,
                     rng: np.random.Generator) -> None:
    """Update both 3-level hierarchies in place.

    Per block: row shrinkage gamma from its IG2 full conditional (prior scale
    plus the row's quadratic form), the row scale s_n from its gamma full
    conditional, and the global scale from its IG2 full conditional pooling
    all rows.
    """
    n_vars = state.n_vars

    if state.a.shape[1] and prior.fix_gamma_a is None:
        nu_a, a_a, s_sa, nu_sa = prior.a_hyper
        for n in range(n_vars):
            mu, omega = prior.a_row_moments(n)
            dev = _free_row(state.a[n], prior.a_selector(n)) - mu
            quad = float(dev @ np.linalg.solve(omega, dev))
            if quad < 0 or not np.isfinite(quad):
                raise NumericalError("negative quadratic form in the A shrinkage block")
            state.gamma_a[n] = ig2_rvs(state.s_a[n] + quad, nu_a + dev.size, rng)
            rate = 1.0 / state.s_a_glob + 1.0 / (2.0 * state.gamma_a[n])
            state.s_a[n] = rng.gamma(a_a + nu_a / 2.0, 1.0 / rate)
        state.s_a_glob = float(ig2_rvs(s_sa + 2.0 * state.s_a.sum(),
                                       nu_sa + 2.0 * n_vars * a_a, rng))

    if prior.fix_gamma_b is None:
        nu_b, a_b, s_sb, nu_sb = prior.b_hyper
        for n in range(n_vars):
            b_free = _free_row(state.b0[n], prior.b_selector(n))
            omega = prior.b_omega_row(n, b_free.size)
            quad = float(b_free @ np.linalg.solve(omega, b_free))
            if quad < 0 or not np.isfinite(quad):
                raise NumericalError("negative quadratic form in the B0 shrinkage block")
            state.gamma_b[n] = ig2_rvs(state.s_b[n] + quad, nu_b + b_free.size, rng)
            rate = 1.0 / state.s_b_glob + 1.0 / (2.0 * state.gamma_b[n])
            state.s_b[n] = rng.gamma(a_b + nu_b / 2.0, 1.0 / rate)
        state.s_b_glob = float(ig2_rvs(s_sb + 2.0 * state.s_b.sum(),
                                       nu_sb + 2.0 * n_vars * a_b, rng))


# ---------------------------------------------------------------------------
# initialisation and the full sampler


def _ig2_prior_mean(scale: float, shape: float) -> float:
    return scale / (shape - 2.0) if shape > 2.0 else scale / shape


def _initial_state(data: TimeSeriesData, vol: VolatilitySpec, prior: PriorSpec,
                   specs: list[MarkovSpec], rng: np.random.Generator) -> ParameterState:
    n_vars, k = data.n_vars, data.n_regressors
    t_obs = data.n_obs
    regimes = vol.regimes
    n_proc = vol.n_processes(n_vars)

    a = np.empty((n_vars, k))
    for n in range(n_vars):
        v = prior.a_selector(n)
        mu, _ = prior.a_row_moments(n)
        a[n] = mu if v is None else mu @ v

    cov = np.cov(data.y.T) if t_obs > 1 else np.eye(n_vars)
    cov = np.atleast_2d(cov) + 1e-8 * np.trace(np.atleast_2d(cov)) / n_vars * np.eye(n_vars)
    b0 = np.linalg.inv(np.linalg.cholesky(cov))
    for n in range(n_vars):
        v = prior.b_selector(n)
        if v is not None:
            b0[n] = (b0[n] @ v.T) @ v
            if not np.any(b0[n]):
                b0[n] = v.sum(axis=0)  # fall back to the selector pattern

    nu_a, a_a, s_sa, nu_sa = prior.a_hyper
    nu_b, a_b, s_sb, nu_sb = prior.b_hyper
    s_a_glob = _ig2_prior_mean(s_sa, nu_sa)
    s_a = np.full(n_vars, a_a * s_a_glob)
    gamma_a = (np.full(n_vars, prior.fix_gamma_a) if prior.fix_gamma_a is not None
               else np.array([_ig2_prior_mean(s_a[n], nu_a) for n in range(n_vars)]))
    s_b_glob = _ig2_prior_mean(s_sb, nu_sb)
    s_b = np.full(n_vars, a_b * s_b_glob)
    gamma_b = (np.full(n_vars, prior.fix_gamma_b) if prior.fix_gamma_b is not None
               else np.array([_ig2_prior_mean(s_b[n], nu_b) for n in range(n_vars)]))

    transitions = np.empty((n_proc, regimes, regimes))
    initials = np.empty((n_proc, regimes))
    paths = np.empty((n_proc, t_obs), dtype=np.int64)
    for i in range(n_proc):
        spec = specs[i]
        transitions[i] = sample_transition_matrix(np.empty(0, dtype=np.int64),
                                                  prior.transition_concentration, regimes,
                                                  rng, prior.transition_diag_boost)
        initials[i] = rng.dirichlet(np.full(regimes, prior.initial_concentration))
        if spec.kind == "exogenous":
            paths[i] = spec.fixed_path
            continue
        for _ in range(100):
            paths[i] = simulate_chain(transitions[i], initials[i], t_obs, rng)
            if meets_min_occupancy(paths[i], regimes, spec.min_occupancy):
                break
        else:
            paths[i] = np.sort(np.arange(t_obs) % regimes)  # balanced fallback

    return ParameterState(a=a, b0=b0, variances=np.ones((n_vars, regimes)),
                          paths=paths, transitions=transitions, initials=initials,
                          gamma_a=gamma_a, s_a=s_a, s_a_glob=float(s_a_glob),
                          gamma_b=gamma_b, s_b=s_b, s_b_glob=float(s_b_glob))


def run_sampler(data: TimeSeriesData, volatility: VolatilitySpec, prior: PriorSpec,
                config: SamplerConfig, likelihood_off: bool = False,
                init_state: ParameterState | None = None) -> PosteriorSample:
    """Run the full Gibbs sampler and collect post-burn-in, thinned draws.

    Every stored draw is validated against the parameter-state invariants
    (variance normalisation, nonsingular B0, positive shrinkage). Block
    failures abort with the sweep index attached.
    """
    n_vars, k = data.n_vars, data.n_regressors
    prior.validate(n_vars)
    if prior.a_mean.shape != (n_vars, k):
        raise DataError(f"prior a_mean shape {prior.a_mean.shape} does not match (N, K) = "
                        f"({n_vars}, {k})")
    if k and data.n_obs <= k and not likelihood_off:
        raise DataError(f"need more observations than regressors: T={data.n_obs}, K={k}")
    if volatility.variant == "exh" and volatility.markov_spec(data.n_obs).fixed_path.shape[0] != data.n_obs:
        raise DataError("exogenous regime schedule does not match the sample length")

    rng = np.random.default_rng(config.seed)
    n_proc = volatility.n_processes(n_vars)
    specs = [volatility.markov_spec(data.n_obs) for _ in range(n_proc)]
    state = init_state.copy() if init_state is not None else _initial_state(
        data, volatility, prior, specs, rng)

    draws: list[ParameterState] = []
    occupancy_failures = np.zeros(n_proc, dtype=np.int64)
    data_or_none = None if likelihood_off else data

    for sweep in range(config.total_draws):
        try:
            if not likelihood_off:
                resid = (data.y - data.x @ state.a.T) @ state.b0.T
            else:
                resid = None
            occupancy_failures += sample_paths(
                state, resid, specs, volatility.variant, rng,
                retry_cap=config.occupancy_retry_cap, likelihood_off=likelihood_off)

            for i in range(n_proc):
                if specs[i].kind == "exogenous":
                    continue
                state.transitions[i] = sample_transition_matrix(
                    state.paths[i], prior.transition_concentration, state.n_regimes,
                    rng, prior.transition_diag_boost)
                state.initials[i] = sample_initial_probs(
                    int(state.paths[i][0]), prior.initial_concentration,
                    state.n_regimes, rng)

            for n in range(n_vars):
                resid_n = None if likelihood_off else resid[:, n]
                state.variances[n] = sample_variances(
                    resid_n, state.paths[state.process_of(n)], state.n_regimes, prior, rng)

            sigma2 = None if likelihood_off else state.sigma2_series()
            state.b0 = sample_b0(data_or_none, state, prior, rng, sigma2=sigma2)
            if k:
                for n in range(n_vars):
                    state.a[n] = sample_a_row(n, data_or_none, state, prior, rng,
                                              sigma2=sigma2)
            sample_shrinkage(state, prior, rng)
        except NumericalError as exc:
            raise NumericalError(f"sweep {sweep}: {exc}") from exc

        if sweep >= config.burn_in and (sweep - config.burn_in) % config.thinning == 0:
            stored = state.copy()
            stored.validate()
            draws.append(stored)

    diagnostics = {
        "occupancy_failures": occupancy_failures,
        "sweeps": config.total_draws,
        "seed": config.seed,
        "likelihood_off": likelihood_off,
    }
    return PosteriorSample(draws=draws, burn_in=config.burn_in, thinning=config.thinning,
                           diagnostics=diagnostics, volatility=volatility)
