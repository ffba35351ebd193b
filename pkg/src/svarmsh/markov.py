"""Discrete-regime machinery: forward filter, backward sampler, transition and
initial-probability posteriors, ergodic distributions, occupancy accounting.

Regime paths are integer arrays with values in {0, ..., M-1}. Three kinds of
process are supported: ``stationary`` (irreducible chain, every regime must
keep at least three observations during sampling), ``sparse`` (overfitting
regime count, zero occupancy allowed) and ``exogenous`` (the path is fixed by
the investigator and never redrawn).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .validation import check_positive, check_rng, check_simplex, check_transition_matrix

try:  # the per-step filter loops dominate sampler runtime; JIT when available
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is an optional accelerator
    def _njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

STATIONARY_MIN_OCCUPANCY = 3


@_njit(cache=True)
def _filter_kernel(likmat, transition, initial, filt, norms):
    """Scaled forward recursion; ``likmat`` rows are already max-shifted
    likelihoods. Returns False on a degenerate step."""
    t_obs, m = likmat.shape
    pred = initial.copy()
    for t in range(t_obs):
        c = 0.0
        for i in range(m):
            w = pred[i] * likmat[t, i]
            filt[t, i] = w
            c += w
        if not (c > 0.0) or not np.isfinite(c):
            return False
        norms[t] = c
        for i in range(m):
            filt[t, i] /= c
        for j in range(m):
            s = 0.0
            for i in range(m):
                s += filt[t, i] * transition[i, j]
            pred[j] = s
    return True


@_njit(cache=True)
def _backward_kernel(filt, transition, uniforms, states):
    """Sample one path backwards given filtered probabilities; ``uniforms``
    holds one U(0,1) draw per period."""
    t_obs, m = filt.shape
    # terminal draw from the last filtered distribution
    u = uniforms[t_obs - 1]
    acc = 0.0
    states[t_obs - 1] = m - 1
    for i in range(m):
        acc += filt[t_obs - 1, i]
        if u < acc:
            states[t_obs - 1] = i
            break
    for t in range(t_obs - 2, -1, -1):
        nxt = states[t + 1]
        total = 0.0
        for i in range(m):
            total += filt[t, i] * transition[i, nxt]
        u = uniforms[t] * total
        acc = 0.0
        states[t] = m - 1
        for i in range(m):
            acc += filt[t, i] * transition[i, nxt]
            if u < acc:
                states[t] = i
                break
    return states


@dataclass(frozen=True)
class MarkovSpec:
    """Specification of one regime process."""

    regimes: int
    kind: str = "stationary"  # stationary | sparse | exogenous
    fixed_path: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.regimes < 1:
            raise ValueError(f"regimes must be >= 1, got {self.regimes}")
        if self.kind not in ("stationary", "sparse", "exogenous"):
            raise ValueError(f"unknown Markov process kind {self.kind!r}")
        if self.kind == "exogenous":
            if self.fixed_path is None:
                raise ValueError("exogenous processes require a fixed_path")
            path = np.asarray(self.fixed_path, dtype=np.int64)
            if path.ndim != 1 or path.min() < 0 or path.max() >= self.regimes:
                raise ValueError("fixed_path entries must lie in {0, ..., regimes-1}")
            path.flags.writeable = False
            object.__setattr__(self, "fixed_path", path)
        elif self.fixed_path is not None:
            raise ValueError("fixed_path is only valid for exogenous processes")

    @property
    def min_occupancy(self) -> int:
        return STATIONARY_MIN_OCCUPANCY if self.kind == "stationary" else 0


def _categorical(probs: np.ndarray, rng: np.random.Generator) -> int:
    c = np.cumsum(probs)
    return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), probs.size - 1))


def forward_filter(regime_logliks: np.ndarray, transition: np.ndarray,
                   initial: np.ndarray) -> tuple[np.ndarray, float]:
    """Run the HMM forward filter in log-safe arithmetic.

    Each step shifts the regime log-likelihood row by its maximum before
    exponentiating (the log-sum-exp trick), so arbitrarily small likelihoods
    filter correctly.

    Returns the (T, M) filtered probabilities P(s_t = m | y_{1:t}) and the
    total log-likelihood.
    """
    logliks = np.asarray(regime_logliks, dtype=float)
    P = np.ascontiguousarray(transition, dtype=float)
    pi0 = np.ascontiguousarray(initial, dtype=float)
    T, M = logliks.shape
    shifts = logliks.max(axis=1)
    if not np.all(np.isfinite(shifts)):
        t_bad = int(np.flatnonzero(~np.isfinite(shifts))[0])
        raise NumericalError(f"degenerate regime likelihood row at t={t_bad}")
    likmat = np.exp(logliks - shifts[:, None])
    filt = np.empty((T, M))
    norms = np.empty(T)
    if not _filter_kernel(likmat, P, pi0, filt, norms):
        raise NumericalError("degenerate regime likelihood row in the forward filter")
    return filt, float(np.log(norms).sum() + shifts.sum())


def ffbs(regime_logliks: np.ndarray, transition: np.ndarray, initial: np.ndarray,
         rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw regime paths from their joint posterior by forward filtering then
    backward sampling.

    With ``size=None`` returns one (T,) path; otherwise a (size, T) batch that
    shares a single forward pass.
    """
    P = check_transition_matrix(transition)
    pi0 = check_simplex(initial, "initial")
    check_rng(rng)
    filt, _ = forward_filter(regime_logliks, P, pi0)
    T, M = filt.shape

    if size is None:
        states = np.empty(T, dtype=np.int64)
        _backward_kernel(filt, np.ascontiguousarray(P), rng.random(T), states)
        return states

    states = np.empty((size, T), dtype=np.int64)
    c = np.cumsum(filt[T - 1])
    states[:, T - 1] = np.minimum(np.searchsorted(c, rng.random(size) * c[-1], side="right"), M - 1)
    for t in range(T - 2, -1, -1):
        w = filt[t][:, None] * P  # w[i, j] proportional to P(s_t = i | s_{t+1} = j, y_{1:t})
        cw = np.cumsum(w, axis=0)
        cw /= cw[-1]
        thresholds = cw[:, states[:, t + 1]]  # (M, size)
        states[:, t] = np.minimum((rng.random(size)[None, :] > thresholds).sum(axis=0), M - 1)
    return states


def simulate_chain(transition: np.ndarray, initial: np.ndarray, length: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Simulate a path of the chain a priori (no data)."""
    P = check_transition_matrix(transition)
    pi0 = check_simplex(initial, "initial")
    check_rng(rng)
    states = np.empty(length, dtype=np.int64)
    if length == 0:
        return states
    states[0] = _categorical(pi0, rng)
    for t in range(1, length):
        states[t] = _categorical(P[states[t - 1]], rng)
    return states


def count_transitions(path: np.ndarray, regimes: int) -> np.ndarray:
    """(M, M) matrix of observed regime-to-regime transition counts."""
    counts = np.zeros((regimes, regimes), dtype=np.int64)
    p = np.asarray(path, dtype=np.int64)
    if p.size > 1:
        np.add.at(counts, (p[:-1], p[1:]), 1)
    return counts


def sample_transition_matrix(path: np.ndarray, concentration: float, regimes: int,
                             rng: np.random.Generator, diag_boost: float = 0.0) -> np.ndarray:
    """Draw each transition row from Dirichlet(concentration + counts out of that regime).

    Rows with zero occupancy revert to the prior, which is what keeps sparse
    (overfitting) specifications proper. ``diag_boost`` adds an optional
    stickiness mass on the diagonal of the prior concentration.
    """
    check_positive(concentration, "concentration")
    check_rng(rng)
    conc = np.full((regimes, regimes), float(concentration))
    if diag_boost:
        conc += diag_boost * np.eye(regimes)
    conc += count_transitions(path, regimes)
    out = np.empty((regimes, regimes))
    for m in range(regimes):
        out[m] = rng.dirichlet(conc[m])
    return out


def sample_initial_probs(start_state: int, concentration: float, regimes: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Dirichlet draw of the initial regime probabilities given the path's first state."""
    check_positive(concentration, "concentration")
    check_rng(rng)
    conc = np.full(regimes, float(concentration))
    conc[start_state] += 1.0
    return rng.dirichlet(conc)


def ergodic_probabilities(transition: np.ndarray) -> np.ndarray:
    """Stationary distribution pi with pi @ P = pi, sum(pi) = 1.

    Solved as the least-squares solution of the stacked linear system
    [P' - I; 1'] pi = [0; 1], which is deterministic; uniqueness is checked
    through the modulus gap of the second-largest eigenvalue.
    """
    P = check_transition_matrix(transition)
    M = P.shape[0]
    if M == 1:
        return np.ones(1)
    mods = np.sort(np.abs(np.linalg.eigvals(P)))[::-1]
    if mods[1] > 1.0 - 1e-8:
        raise NumericalError("transition matrix has no unique stationary distribution "
                             "(reducible or periodic chain)")
    A = np.vstack([P.T - np.eye(M), np.ones((1, M))])
    b = np.zeros(M + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    if np.max(np.abs(pi @ P - pi)) > 1e-10:
        raise NumericalError("stationary distribution did not converge")
    return pi


def meets_min_occupancy(path: np.ndarray, regimes: int, min_count: int) -> bool:
    """True iff every regime holds at least ``min_count`` periods of the path."""
    if min_count <= 0:
        return True
    counts = np.bincount(np.asarray(path, dtype=np.int64), minlength=regimes)
    return bool(counts.min() >= min_count)
