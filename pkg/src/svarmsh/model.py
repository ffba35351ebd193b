"""Core data model: observation containers, volatility-family specification,
prior specification, and the full parameter state of one posterior draw.

Conventions
-----------
The reduced form is y_t = A x_t + eps_t with x_t = [y_{t-1}', ..., y_{t-p}', d_t']
(K = N*p + D regressors); the structural form is B0 eps_t = u_t. Structural
shock n has regime variances ``variances[n]`` (length M, averaging to 1 by
construction) driven either by its own Markov process (HMSH), one process
shared by all shocks (MSH), or a fixed exogenous schedule (EXH).
"""

from __future__ import annotations

import copy as _copy
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError
from .markov import MarkovSpec
from .validation import as_matrix

NORMALISATION_TOL = 1e-12


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class TimeSeriesData:
    """Observed panel plus the lagged-regressor matrix.

    Row t of ``x`` is [y_{t-1}', ..., y_{t-p}', d_t'] for the same t as row t
    of ``y``; both start p periods into the raw sample.
    """

    y: np.ndarray
    x: np.ndarray
    lag_order: int
    deterministic_count: int

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]

    @property
    def n_vars(self) -> int:
        return self.y.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.x.shape[1]

    def head(self, n_obs: int) -> "TimeSeriesData":
        """First ``n_obs`` rows, used by expanding-window forecasting."""
        if not 1 <= n_obs <= self.n_obs:
            raise DataError(f"head({n_obs}) outside sample of length {self.n_obs}")
        return replace(self, y=self.y[:n_obs], x=self.x[:n_obs])


def build_regressors(raw_y: np.ndarray, lags: int, deterministics="const") -> TimeSeriesData:
    """Assemble (y, x) from a raw T_raw x N panel.

    ``deterministics`` is ``"const"`` for an intercept column, ``None`` for no
    deterministic terms, or a T_raw x D array of exogenous columns aligned
    with the raw sample.
    """
    raw = as_matrix(raw_y, "raw_y")
    if not np.all(np.isfinite(raw)):
        raise DataError("raw_y contains non-finite values")
    t_raw, n = raw.shape
    if lags < 0:
        raise DataError(f"lags must be >= 0, got {lags}")
    if t_raw <= lags:
        raise DataError(f"sample of length {t_raw} too short for {lags} lags")

    t = t_raw - lags
    if deterministics is None:
        det = np.empty((t_raw, 0))
    elif isinstance(deterministics, str) and deterministics == "const":
        det = np.ones((t_raw, 1))
    else:
        det = as_matrix(deterministics, "deterministics")
        if det.shape[0] != t_raw:
            raise DataError("deterministic terms must align with the raw sample")
    d = det.shape[1]

    x = np.empty((t, n * lags + d))
    for ell in range(1, lags + 1):
        x[:, (ell - 1) * n:ell * n] = raw[lags - ell:t_raw - ell]
    x[:, n * lags:] = det[lags:]
    return TimeSeriesData(y=raw[lags:].copy(), x=x, lag_order=lags, deterministic_count=d)


# ---------------------------------------------------------------------------
# volatility family


@dataclass(frozen=True)
class VolatilitySpec:
    """Which volatility model drives the shock variances.

    variant:
        ``"hmsh"`` - one Markov process per shock (heterogeneous);
        ``"msh"``  - a single process shared by all shocks;
        ``"exh"``  - exogenous regime changes at fixed ``breakpoints``
        (0-based indices where a new regime starts; regime count is derived).
    sparse:
        overfitting regime count with zero occupancy allowed (no occupancy
        rule); stationary otherwise (three-observation rule during sampling).
    """

    variant: str
    regimes: int = 2
    sparse: bool = False
    breakpoints: tuple[int, ...] = ()

    def __post_init__(self):
        if self.variant not in ("exh", "msh", "hmsh"):
            raise ValueError(f"unknown volatility variant {self.variant!r}")
        if self.variant == "exh":
            bps = tuple(int(b) for b in self.breakpoints)
            if any(b <= 0 for b in bps) or list(bps) != sorted(set(bps)):
                raise ValueError("breakpoints must be strictly increasing positive indices")
            object.__setattr__(self, "breakpoints", bps)
            object.__setattr__(self, "regimes", len(bps) + 1)
            object.__setattr__(self, "sparse", False)
        else:
            if self.breakpoints:
                raise ValueError("breakpoints are only valid for the exh variant")
            if self.regimes < 1:
                raise ValueError(f"regimes must be >= 1, got {self.regimes}")

    @classmethod
    def from_name(cls, name: str, breakpoints: tuple[int, ...] = ()) -> "VolatilitySpec":
        """Parse compact model names: ``exh``, ``msh2``, ``msh20``, ``hmsh2``, ...

        Regime counts of 10 or more default to the sparse representation;
        append ``+stationary`` or ``+sparse`` to override.
        """
        label = name.strip().lower()
        override = None
        if "+" in label:
            label, suffix = label.split("+", 1)
            if suffix not in ("sparse", "stationary"):
                raise ValueError(f"unknown suffix {suffix!r} in model name {name!r}")
            override = suffix == "sparse"
        if label == "exh":
            return cls("exh", breakpoints=breakpoints)
        for variant in ("hmsh", "msh"):
            if label.startswith(variant) and label[len(variant):].isdigit():
                m = int(label[len(variant):])
                sparse = (m >= 10) if override is None else override
                return cls(variant, regimes=m, sparse=sparse)
        raise ValueError(f"cannot parse model name {name!r}")

    @property
    def name(self) -> str:
        if self.variant == "exh":
            return "exh"
        return f"{self.variant}{self.regimes}"

    def n_processes(self, n_vars: int) -> int:
        return n_vars if self.variant == "hmsh" else 1

    def exh_path(self, length: int) -> np.ndarray:
        path = np.zeros(length, dtype=np.int64)
        for i, b in enumerate(self.breakpoints):
            path[b:] = i + 1
        return path

    def markov_spec(self, n_obs: int) -> MarkovSpec:
        if self.variant == "exh":
            return MarkovSpec(self.regimes, "exogenous", fixed_path=self.exh_path(n_obs))
        return MarkovSpec(self.regimes, "sparse" if self.sparse else "stationary")


# ---------------------------------------------------------------------------
# priors


def minnesota_mean(n_vars: int, lags: int, deterministic_count: int,
                   nonstationary=True) -> np.ndarray:
    """Prior mean of A: per equation, 1 on the first own lag for unit-root
    nonstationary variables, zero everywhere else."""
    flags = np.broadcast_to(np.asarray(nonstationary, dtype=bool), (n_vars,))
    mean = np.zeros((n_vars, n_vars * lags + deterministic_count))
    if lags >= 1:
        for n in range(n_vars):
            if flags[n]:
                mean[n, n] = 1.0
    return mean


def minnesota_omega_diag(n_vars: int, lags: int, deterministic_count: int,
                         deterministic_variance: float = 100.0) -> np.ndarray:
    """Diagonal of the A-prior scale: lag-l blocks shrink as l^{-2},
    deterministic columns get a large fixed variance."""
    lag_part = np.repeat(1.0 / np.arange(1, lags + 1) ** 2, n_vars) if lags else np.empty(0)
    det_part = np.full(deterministic_count, deterministic_variance)
    return np.concatenate([lag_part, det_part])


@dataclass
class PriorSpec:
    """All prior hyper-parameters. Underlined quantities from the model's
    hierarchy map to tuples:

    ``a_hyper = (nu_A, a_A, s_sA, nu_sA)`` for the autoregressive shrinkage
    hierarchy, ``b_hyper = (nu_b, a_B, s_sB, nu_sB)`` for the structural one.
    ``fix_gamma_a`` / ``fix_gamma_b`` switch the corresponding hierarchy off
    and pin the row shrinkage at the given value.
    """

    a_mean: np.ndarray
    a_omega_diag: np.ndarray
    a_hyper: tuple[float, float, float, float] = (10.0, 10.0, 10.0, 10.0)
    b_omega: tuple[np.ndarray, ...] | None = None
    b_shape: float | None = None
    b_hyper: tuple[float, float, float, float] = (10.0, 10.0, 1.0, 100.0)
    variance_concentration: float = 1.0
    transition_concentration: float = 1.0
    transition_diag_boost: float = 0.0
    initial_concentration: float = 1.0
    v_a: tuple[np.ndarray | None, ...] | None = None
    v_b: tuple[np.ndarray | None, ...] | None = None
    fix_gamma_a: float | None = None
    fix_gamma_b: float | None = None

    @classmethod
    def default(cls, n_vars: int, lags: int, deterministic_count: int = 1,
                nonstationary=True) -> "PriorSpec":
        return cls(
            a_mean=minnesota_mean(n_vars, lags, deterministic_count, nonstationary),
            a_omega_diag=minnesota_omega_diag(n_vars, lags, deterministic_count),
        )

    # regime-variance block: z_m ~ IG2(variance_scale + U_m, variance_shape + T_m)
    @property
    def variance_scale(self) -> float:
        return 1.0

    @property
    def variance_shape(self) -> float:
        return 2.0 * self.variance_concentration

    def nu_b(self, n_vars: int) -> float:
        return float(self.b_shape) if self.b_shape is not None else float(n_vars)

    def a_selector(self, n: int) -> np.ndarray | None:
        return None if self.v_a is None else self.v_a[n]

    def b_selector(self, n: int) -> np.ndarray | None:
        return None if self.v_b is None else self.v_b[n]

    def b_omega_row(self, n: int, r: int) -> np.ndarray:
        if self.b_omega is None:
            return np.eye(r)
        return np.asarray(self.b_omega[n], dtype=float)

    def a_row_moments(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Prior mean vector and scale matrix of the free elements of A's row n
        (shrinkage multiplier excluded)."""
        v = self.a_selector(n)
        if v is None:
            return self.a_mean[n].copy(), np.diag(self.a_omega_diag)
        v = np.asarray(v, dtype=float)
        return v @ self.a_mean[n], v @ np.diag(self.a_omega_diag) @ v.T

    def validate(self, n_vars: int) -> None:
        if np.any(self.a_omega_diag <= 0):
            raise ValueError("a_omega_diag must be strictly positive")
        for label, selectors in (("v_a", self.v_a), ("v_b", self.v_b)):
            if selectors is None:
                continue
            for n, v in enumerate(selectors):
                if v is None:
                    continue
                v = np.asarray(v, dtype=float)
                # placement selectors: one unit entry per row, distinct columns
                if not np.allclose(v @ v.T, np.eye(v.shape[0])):
                    raise ValueError(f"{label}[{n}] rows must be orthonormal "
                                     "(0/1 placement selectors)")
        for val, label in ((self.variance_concentration, "variance_concentration"),
                           (self.transition_concentration, "transition_concentration"),
                           (self.initial_concentration, "initial_concentration")):
            if val <= 0:
                raise ValueError(f"{label} must be > 0")
        if self.nu_b(n_vars) < n_vars:
            raise ValueError(f"b_shape must be >= n_vars = {n_vars}")
        if self.b_omega is not None:
            for n, om in enumerate(self.b_omega):
                om = np.asarray(om, dtype=float)
                if not np.allclose(om, om.T) or np.any(np.linalg.eigvalsh(om) <= 0):
                    raise ValueError(f"b_omega[{n}] must be symmetric positive definite")


# ---------------------------------------------------------------------------
# parameter state


@dataclass
class ParameterState:
    """One full draw of the sampler. ``paths`` has one row per Markov process
    (N rows for HMSH, one otherwise)."""

    a: np.ndarray           # (N, K)
    b0: np.ndarray          # (N, N)
    variances: np.ndarray   # (N, M) regime variances per shock, mean 1 per row
    paths: np.ndarray       # (n_processes, T) regime indices
    transitions: np.ndarray  # (n_processes, M, M)
    initials: np.ndarray    # (n_processes, M)
    gamma_a: np.ndarray     # (N,)
    s_a: np.ndarray         # (N,)
    s_a_glob: float
    gamma_b: np.ndarray     # (N,)
    s_b: np.ndarray         # (N,)
    s_b_glob: float

    @property
    def n_vars(self) -> int:
        return self.b0.shape[0]

    @property
    def n_regimes(self) -> int:
        return self.variances.shape[1]

    @property
    def n_obs(self) -> int:
        return self.paths.shape[1]

    def process_of(self, shock: int) -> int:
        return shock if self.paths.shape[0] == self.n_vars and self.n_vars > 1 else 0

    def sigma2_series(self) -> np.ndarray:
        """(T, N) conditional variances implied by the regime paths."""
        out = np.empty((self.n_obs, self.n_vars))
        for n in range(self.n_vars):
            out[:, n] = self.variances[n, self.paths[self.process_of(n)]]
        return out

    def validate(self) -> None:
        n = self.n_vars
        means = self.variances.mean(axis=1)
        if np.any(np.abs(means - 1.0) > NORMALISATION_TOL):
            raise ValueError(f"regime variances violate the mean-1 normalisation: {means}")
        scale = np.prod(np.linalg.norm(self.b0, axis=1))
        if abs(np.linalg.det(self.b0)) <= 1e-12 * max(scale, 1e-300):
            raise ValueError("b0 is numerically singular")
        if self.a.shape[1] and (np.any(self.gamma_a <= 0) or np.any(self.s_a <= 0)
                                or self.s_a_glob <= 0):
            raise ValueError("A-block shrinkage scalars must be strictly positive")
        if np.any(self.gamma_b <= 0) or np.any(self.s_b <= 0) or self.s_b_glob <= 0:
            raise ValueError("B-block shrinkage scalars must be strictly positive")
        if self.paths.min() < 0 or self.paths.max() >= self.n_regimes:
            raise ValueError("regime path out of range")
        _ = n

    def copy(self) -> "ParameterState":
        return _copy.deepcopy(self)


def structural_residuals(data: TimeSeriesData, state: ParameterState) -> np.ndarray:
    """(T, N) structural shocks u_t = B0 (y_t - A x_t)."""
    eps = data.y - data.x @ state.a.T
    return eps @ state.b0.T


def predictive_covariance(state: ParameterState, t: int) -> np.ndarray:
    """One-period conditional covariance B0^{-1} diag(sigma_t^2) B0^{-1}'."""
    b0_inv = np.linalg.inv(state.b0)
    sig2 = np.array([state.variances[n, state.paths[state.process_of(n), t]]
                     for n in range(state.n_vars)])
    cov = b0_inv @ np.diag(sig2) @ b0_inv.T
    return 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# posterior sample


@dataclass
class PosteriorSample:
    """Ordered post-burn-in draws plus sampler diagnostics."""

    draws: list[ParameterState]
    burn_in: int
    thinning: int
    diagnostics: dict = field(default_factory=dict)
    volatility: VolatilitySpec | None = None

    def __len__(self) -> int:
        return len(self.draws)

    def b0_draws(self) -> np.ndarray:
        return np.stack([d.b0 for d in self.draws])

    def a_draws(self) -> np.ndarray:
        return np.stack([d.a for d in self.draws])

    def variance_draws(self) -> np.ndarray:
        return np.stack([d.variances for d in self.draws])

    def sigma2_series_draws(self) -> np.ndarray:
        """(S, T, N) conditional-variance paths across draws."""
        return np.stack([d.sigma2_series() for d in self.draws])
