"""Moment-matched proposal and importance densities.

Multivariate normal proposals are fitted by the method of moments and
evaluated through a cached Cholesky factor.  The beta-mixture importance
density blends a best-fitting beta with a uniform component to guarantee fat
tails on the unit interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .exceptions import BoundaryError, DomainError, FitError

_LOG_2PI = np.log(2.0 * np.pi)


class MvnProposal:
    """Multivariate normal with cached lower-triangular factor.

    A covariance that fails to factor is repaired with an escalating ridge
    (starting at 1e-10 times the mean diagonal, growing tenfold, at most six
    attempts) before giving up.
    """

    def __init__(self, mean, covariance):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(covariance, dtype=float))
        d = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (d, d):
            raise FitError(f"mean shape {mean.shape} and covariance shape {cov.shape} disagree")
        if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-12):
            raise FitError("covariance must be symmetric within 1e-12")
        cov = 0.5 * (cov + cov.T)
        self.mean = mean
        self.covariance = cov
        self._chol = self._factor(cov)
        self._log_det = 2.0 * np.sum(np.log(np.diag(self._chol)))

    @staticmethod
    def _factor(cov: np.ndarray) -> np.ndarray:
        ridge = 1e-10 * max(float(np.mean(np.diag(cov))), np.finfo(float).tiny)
        for attempt in range(7):
            shift = 0.0 if attempt == 0 else ridge * 10 ** (attempt - 1)
            try:
                return linalg.cholesky(cov + shift * np.eye(cov.shape[0]), lower=True)
            except linalg.LinAlgError:
                continue
        raise FitError("covariance is not positive definite even after ridge repair")

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]

    def log_pdf(self, xi):
        """Log density at one vector or at each row of a matrix."""
        xi = np.asarray(xi, dtype=float)
        single = xi.ndim == 1
        pts = np.atleast_2d(xi)
        if pts.shape[1] != self.dimension:
            raise DomainError(
                f"points have {pts.shape[1]} coordinates, proposal has {self.dimension}"
            )
        y = linalg.solve_triangular(self._chol, (pts - self.mean).T, lower=True)
        out = -0.5 * (self.dimension * _LOG_2PI + self._log_det + (y * y).sum(axis=0))
        return float(out[0]) if single else out

    def sample(self, n: int, seed) -> np.ndarray:
        """Draw an (n, d) matrix; deterministic given the seed."""
        if n < 1:
            raise ValueError("need at least one draw")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        z = rng.standard_normal((n, self.dimension))
        return self.mean + z @ self._chol.T


def fit_mvn_moments(samples) -> MvnProposal:
    """Moment-matched multivariate normal: column means plus sample covariance.

    Requires strictly more rows than columns; the covariance uses the n-1
    denominator.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n, d = samples.shape
    if n <= d:
        raise FitError(f"singular fit: {n} draws cannot determine a {d}-dimensional covariance")
    mean = samples.mean(axis=0)
    cov = np.atleast_2d(np.cov(samples, rowvar=False, ddof=1))
    return MvnProposal(mean, cov)


def beta_params_from_moments(mean: float, variance: float) -> tuple[float, float]:
    """Method-of-moments beta shapes from a mean and variance on (0, 1)."""
    if not 0.0 < mean < 1.0:
        raise FitError(f"mean must lie in (0, 1), got {mean}")
    if variance <= 0.0:
        raise FitError("variance must be positive")
    common = mean * (1.0 - mean) / variance - 1.0
    if common <= 0.0:
        raise FitError(
            f"variance {variance} is too large for mean {mean}: beta shapes would be negative"
        )
    return mean * common, (1.0 - mean) * common


def fit_beta_moments(samples) -> tuple[float, float]:
    """Method-of-moments beta fit to samples strictly inside (0, 1)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.size < 2:
        raise FitError("need a vector of at least two samples")
    if np.any(samples <= 0.0) or np.any(samples >= 1.0):
        raise FitError("samples must lie strictly inside (0, 1)")
    return beta_params_from_moments(float(samples.mean()), float(samples.var(ddof=1)))


def _beta_log_pdf(theta: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    return (
        (alpha - 1.0) * np.log(theta)
        + (beta - 1.0) * np.log1p(-theta)
        - special.betaln(alpha, beta)
    )


@dataclass(frozen=True)
class BetaMixtureIS:
    """gamma * Uniform(0,1) + (1 - gamma) * Beta(alpha, beta) importance density."""

    gamma: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise FitError(f"mixture weight must lie in [0, 1], got {self.gamma}")
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise FitError("beta shape parameters must be positive")

    def log_pdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        single = theta.ndim == 0
        theta = np.atleast_1d(theta)
        if np.any(theta <= 0.0) or np.any(theta >= 1.0):
            raise BoundaryError("mixture density is defined strictly inside (0, 1)")
        with np.errstate(divide="ignore"):
            log_uniform = np.full(theta.shape, np.log(self.gamma) if self.gamma > 0 else -np.inf)
            log_beta = (
                np.log1p(-self.gamma) + _beta_log_pdf(theta, self.alpha, self.beta)
                if self.gamma < 1.0
                else np.full(theta.shape, -np.inf)
            )
        out = np.logaddexp(log_uniform, log_beta)
        return float(out[0]) if single else out

    def sample(self, n: int, seed) -> np.ndarray:
        """Component chosen by a Bernoulli(gamma) coin, then the component's draw."""
        if n < 1:
            raise ValueError("need at least one draw")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        pick_uniform = rng.random(n) < self.gamma
        draws = rng.beta(self.alpha, self.beta, size=n)
        draws[pick_uniform] = rng.random(int(pick_uniform.sum()))
        return draws
