"""Error quantification for the bridge estimate.

The relative mean-squared error splits into an independent-proposal-draw term
and a posterior-draw term inflated by the normalized spectral density at
frequency zero of the bridge integrand series, estimated by an AIC-selected
autoregressive fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import DiagnosticError, EstimationError
from .models import Model, eval_log_unnorm_post
from .proposal import MvnProposal


@dataclass(frozen=True)
class ErrorReport:
    """Relative mean-squared error split into its two sampling terms.

    ``re2 = term1 + term2`` and ``cv_percent = 100 * sqrt(re2)`` hold exactly;
    ``rho_f2_zero`` is the autocorrelation inflation applied to the posterior
    term.
    """

    re2: float
    cv_percent: float
    rho_f2_zero: float
    term1: float
    term2: float


def spectrum0_ar(series) -> float:
    """Spectral density at frequency zero via a Yule-Walker AR fit.

    The AR order is chosen by AIC over ``0..min(N-1, floor(10*log10(N)))``;
    the returned value is ``innovation_variance / (1 - sum(coefficients))^2``.
    White noise therefore returns (approximately) the series variance.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1 or series.size < 8:
        raise DiagnosticError("need a vector of at least 8 values")
    n = series.size
    x = series - series.mean()
    gamma0 = float(x @ x) / n
    if gamma0 <= 0.0 or not np.isfinite(gamma0):
        raise DiagnosticError("degenerate series: zero or non-finite variance")

    order_max = min(n - 1, int(10.0 * math.log10(n)))
    acov = np.array([float(x[: n - lag] @ x[lag:]) / n for lag in range(order_max + 1)])

    # Levinson-Durbin recursion, tracking AIC across orders.
    best_aic = n * math.log(gamma0)
    best_phi: np.ndarray = np.empty(0)
    best_var = gamma0
    phi = np.empty(0)
    sigma2 = gamma0
    for p in range(1, order_max + 1):
        last = (acov[p] - (phi @ acov[1:p][::-1] if p > 1 else 0.0)) / sigma2
        new_phi = np.empty(p)
        new_phi[p - 1] = last
        if p > 1:
            new_phi[: p - 1] = phi - last * phi[::-1]
        sigma2 = sigma2 * (1.0 - last * last)
        if sigma2 <= 0.0:
            break
        phi = new_phi
        aic = n * math.log(sigma2) + 2.0 * p
        if aic < best_aic:
            best_aic, best_phi, best_var = aic, phi.copy(), sigma2
    denom = 1.0 - best_phi.sum()
    return float(best_var / (denom * denom))


def _bounded_fractions(model: Model, proposal: MvnProposal, log_ml: float,
                       xis: np.ndarray, s1: float, s2: float):
    """f1, f2 at the given draws: normalized posterior and proposal each over
    their defensive-mixture denominator."""
    log_post = eval_log_unnorm_post(model, xis) - log_ml
    log_prop = proposal.log_pdf(np.atleast_2d(xis))
    log_denom = np.logaddexp(math.log(s1) + log_post, math.log(s2) + log_prop)
    return np.exp(log_post - log_denom), np.exp(log_prop - log_denom)


def re2_bridge(
    model: Model,
    proposal: MvnProposal,
    log_ml: float,
    posterior_xi,
    proposal_xi,
) -> ErrorReport:
    """Approximate relative mean-squared error of a bridge estimate.

    ``posterior_xi`` is either one (N1, d) matrix or a list of per-chain
    matrices - the same iterate-half draws the bridge used, so that the
    spectral correction sees each chain's own autocorrelation.  The normalized
    posterior density inside both fractions uses ``log_ml`` as the normalizing
    constant.
    """
    if not np.isfinite(log_ml):
        raise EstimationError("need a finite log marginal likelihood")
    if isinstance(posterior_xi, np.ndarray) and posterior_xi.ndim <= 2:
        chains = [np.atleast_2d(np.asarray(posterior_xi, dtype=float))]
    else:
        chains = [np.atleast_2d(np.asarray(c, dtype=float)) for c in posterior_xi]
    proposal_xi = np.atleast_2d(np.asarray(proposal_xi, dtype=float))

    n1 = sum(c.shape[0] for c in chains)
    n2 = proposal_xi.shape[0]
    s1 = n1 / (n1 + n2)
    s2 = n2 / (n1 + n2)

    f1, _ = _bounded_fractions(model, proposal, log_ml, proposal_xi, s1, s2)
    mean_f1 = float(f1.mean())
    if mean_f1 <= 0.0:
        raise EstimationError("no overlap: f1 vanishes at every proposal draw")
    term1 = float(f1.var(ddof=1)) / (n2 * mean_f1 * mean_f1)

    f2_chains = [
        _bounded_fractions(model, proposal, log_ml, c, s1, s2)[1] for c in chains
    ]
    f2_all = np.concatenate(f2_chains)
    mean_f2 = float(f2_all.mean())
    var_f2 = float(f2_all.var(ddof=1))
    if mean_f2 <= 0.0:
        raise EstimationError("no overlap: f2 vanishes at every posterior draw")

    # Per-chain spectral estimates, combined with variance weights.
    rho_num = 0.0
    rho_den = 0.0
    for f2 in f2_chains:
        v = float(f2.var(ddof=1))
        if v <= 0.0 or f2.size < 8:
            continue
        rho_num += v * (spectrum0_ar(f2) / v)
        rho_den += v
    rho = rho_num / rho_den if rho_den > 0.0 else 1.0

    term2 = rho * var_f2 / (n1 * mean_f2 * mean_f2)
    re2 = term1 + term2
    return ErrorReport(
        re2=re2,
        cv_percent=100.0 * math.sqrt(re2),
        rho_f2_zero=rho,
        term1=term1,
        term2=term2,
    )
