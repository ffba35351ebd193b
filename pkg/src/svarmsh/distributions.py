"""Random variate generation and log-densities for the sampler's building blocks.

The inverse gamma 2 convention used throughout is

    f_IG2(z | s, nu) = Gamma(nu/2)^{-1} (s/2)^{nu/2} z^{-(nu+2)/2} exp(-s / (2 z)),

i.e. z ~ IG2(s, nu) iff s / z ~ chi-square(nu). In the common inverse-gamma
(shape alpha, scale beta) convention this is alpha = nu/2, beta = s/2, so the
mean is s/(nu-2) for nu > 2.

Normalising M independent IG2 variates z_m ~ IG2(s_m, nu_m) by their sum gives
the inverse gamma-based Dirichlet (IGD) distribution on the simplex; its
density (with respect to Lebesgue measure on the first M-1 coordinates, the
last being dependent) is

    f_IGD(x | s, nu) = Gamma(nubar/2) / prod_m Gamma(nu_m/2)
                       * prod_m s_m^{nu_m/2} x_m^{-(nu_m+2)/2}
                       * (sum_m s_m/x_m)^{-nubar/2},      nubar = sum_m nu_m.

With equal scales and nu_m = 2*e the M=2 case reduces exactly to
Dirichlet(e, e); for M > 2 the two families differ.

All samplers take an explicit ``numpy.random.Generator``; the same seed yields
the same draw sequence.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln, logsumexp

from .validation import check_positive, check_rng, check_simplex


def ig2_rvs(scale, shape, rng: np.random.Generator, size=None) -> np.ndarray | float:
    """Draw from IG2(scale, shape) via scale / chi-square(shape).

    ``scale`` and ``shape`` may be scalars or arrays (broadcast against
    ``size``); the return matches numpy's usual broadcasting rules.
    """
    s = check_positive(scale, "scale")
    nu = check_positive(shape, "shape")
    check_rng(rng)
    return s / rng.chisquare(nu, size=size)


def ig2_logpdf(z, scale, shape) -> np.ndarray | float:
    s = np.asarray(check_positive(scale, "scale"), dtype=float)
    nu = np.asarray(check_positive(shape, "shape"), dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("z must be > 0")
    return (-gammaln(nu / 2) + (nu / 2) * np.log(s / 2)
            - (nu + 2) / 2 * np.log(z) - s / (2 * z))


def igd_rvs(scales, shapes, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from the M-variate IGD: independent IG2 draws normalised by their sum.

    Returns shape (M,) or (size, M).
    """
    s = check_positive(scales, "scales")
    nu = check_positive(shapes, "shapes")
    if s.shape != nu.shape or s.ndim != 1:
        raise ValueError("scales and shapes must be 1-D vectors of equal length")
    check_rng(rng)
    n = s.size
    if size is None:
        z = s / rng.chisquare(nu)
        return z / z.sum()
    z = s / rng.chisquare(nu, size=(size, n))
    return z / z.sum(axis=1, keepdims=True)


def igd_logpdf(x, scales, shapes) -> float:
    """Log-density of the IGD at an interior simplex point.

    The coupling term log(sum_m s_m/x_m) is evaluated as a log-sum-exp of
    log(s_m) - log(x_m) so extreme scale/weight ratios cannot overflow.
    """
    s = check_positive(scales, "scales")
    nu = check_positive(shapes, "shapes")
    xv = check_simplex(x, "x", interior=True)
    if not (s.shape == nu.shape == xv.shape):
        raise ValueError("x, scales and shapes must have matching lengths")
    log_s, log_x = np.log(s), np.log(xv)
    nubar = nu.sum()
    return float(
        gammaln(nubar / 2) - gammaln(nu / 2).sum()
        + (nu / 2 * log_s).sum() - ((nu + 2) / 2 * log_x).sum()
        - nubar / 2 * logsumexp(log_s - log_x)
    )


def dirichlet_rvs(alphas, rng: np.random.Generator) -> np.ndarray:
    a = check_positive(alphas, "alphas")
    check_rng(rng)
    return rng.dirichlet(a)


def dirichlet_logpdf(x, alphas) -> float:
    a = check_positive(alphas, "alphas")
    xv = check_simplex(x, "x", interior=True)
    if a.shape != xv.shape:
        raise ValueError("x and alphas must have matching lengths")
    return float(gammaln(a.sum()) - gammaln(a).sum() + ((a - 1) * np.log(xv)).sum())


def gamma_rvs(shape, scale, rng: np.random.Generator, size=None) -> np.ndarray | float:
    """Gamma draw with mean shape * scale (numpy's shape/scale convention)."""
    k = check_positive(shape, "shape")
    theta = check_positive(scale, "scale")
    check_rng(rng)
    return rng.gamma(k, theta, size=size)
