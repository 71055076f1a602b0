"""The four marginal-likelihood estimators.

``naive_mc``, ``importance_sampling``, and ``generalized_harmonic_mean`` are
single-average estimators; ``generic_bridge`` evaluates the two-sample bridge
identity for an arbitrary bridge function, and ``bridge_optimal`` runs the
full pipeline with the variance-minimizing bridge function: split the
posterior draws, moment-fit a normal proposal on the first half, and iterate
the ratio update in log-shifted form until the relative change criterion
holds.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import logsumexp

from .accuracy import re2_bridge
from .exceptions import EstimationError
from .models import Model, eval_log_unnorm_post
from .proposal import MvnProposal, fit_mvn_moments
from .sampler import SampleStore, split_halves

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BridgeConfig:
    """Iteration controls for the optimal-bridge scheme.

    ``initial_guess`` is on the shifted ratio scale (the estimate divided by
    ``exp(l_star)``); zero reproduces the closed first-iterate form.
    """

    tolerance: float = 1e-10
    max_iterations: int = 1000
    initial_guess: float = 0.0

    def __post_init__(self):
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class LogWeights:
    """Log ratios of unnormalized posterior to proposal density at both draw sets.

    ``log_l1`` comes from the posterior draws, ``log_l2`` from the proposal
    draws, and ``l_star`` is the median of ``log_l1`` used to shift the
    iterative scheme into a numerically safe range.
    """

    log_l1: np.ndarray
    log_l2: np.ndarray
    l_star: float

    @classmethod
    def from_model(cls, model: Model, proposal: MvnProposal,
                   posterior_xi: np.ndarray, proposal_xi: np.ndarray) -> "LogWeights":
        log_l1 = eval_log_unnorm_post(model, posterior_xi) - proposal.log_pdf(
            np.atleast_2d(posterior_xi)
        )
        log_l2 = eval_log_unnorm_post(model, proposal_xi) - proposal.log_pdf(
            np.atleast_2d(proposal_xi)
        )
        for name, values in (("log_l1", log_l1), ("log_l2", log_l2)):
            if np.any(np.isnan(values)) or np.any(values == np.inf):
                raise EstimationError(f"{name} contains NaN or +inf weights")
        zeros = int((log_l1 == -np.inf).sum() + (log_l2 == -np.inf).sum())
        if zeros:
            logger.warning("%d zero-likelihood weight terms", zeros)
        return cls(log_l1=log_l1, log_l2=log_l2, l_star=float(np.median(log_l1)))


@dataclass(frozen=True)
class BridgeEstimate:
    """Converged (or flagged) optimal-bridge result with its error estimate."""

    log_ml: float
    iterations: int
    converged: bool
    re2: float
    cv_percent: float


class BridgeIteration(NamedTuple):
    log_ml: float
    iterations: int
    converged: bool
    log_history: list[float]


def log_mean_exp(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    return float(logsumexp(values) - math.log(values.size))


def naive_mc(model_loglik: Callable, prior_sampler: Callable, n: int, seed) -> float:
    """Log of the average likelihood over prior draws.

    ``prior_sampler(rng, n)`` must return n prior draws and ``model_loglik``
    must map that draw array to per-draw log-likelihoods.
    """
    if n < 1:
        raise ValueError("need at least one draw")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draws = prior_sampler(rng, n)
    log_lik = np.asarray(model_loglik(draws), dtype=float)
    if np.all(log_lik == -np.inf):
        warnings.warn("every prior draw has zero likelihood", stacklevel=2)
        return -np.inf
    return log_mean_exp(log_lik)


def importance_sampling(model_logpost_unnorm: Callable, q, n: int, seed) -> float:
    """Log of the average adjusted likelihood over importance-density draws.

    ``q`` must expose ``sample(n, seed)`` and ``log_pdf``; a non-finite weight
    means the density's tails are thinner than the posterior's, which this
    estimator cannot tolerate.
    """
    if n < 1:
        raise ValueError("need at least one draw")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draws = q.sample(n, rng)
    log_w = np.asarray(model_logpost_unnorm(draws), dtype=float) - np.asarray(
        q.log_pdf(draws), dtype=float
    )
    if np.any(np.isnan(log_w)) or np.any(log_w == np.inf):
        raise EstimationError(
            "non-finite importance weight: the importance density must have "
            "fatter tails than the posterior"
        )
    return log_mean_exp(log_w)


def _as_log_density(q) -> Callable[[np.ndarray], np.ndarray]:
    return q.log_pdf if hasattr(q, "log_pdf") else q


def generalized_harmonic_mean(model: Model, q, posterior_xi) -> float:
    """Reciprocal-importance-sampling estimate from posterior draws.

    ``q`` (an object with ``log_pdf`` or a plain log-density callable) should
    be thinner-tailed than the posterior; a warning is emitted when a single
    draw dominates the harmonic sum.
    """
    posterior_xi = np.atleast_2d(np.asarray(posterior_xi, dtype=float))
    log_q = np.asarray(_as_log_density(q)(posterior_xi), dtype=float)
    log_p = eval_log_unnorm_post(model, posterior_xi)
    terms = log_q - log_p
    if np.any(np.isnan(terms)) or np.any(terms == np.inf):
        raise EstimationError(
            "non-finite term: the importance density must be thinner-tailed "
            "than the posterior"
        )
    total = logsumexp(terms)
    if terms.max() - total > math.log(0.5):
        warnings.warn(
            "a single posterior draw dominates the harmonic-mean sum; the "
            "importance density may be too wide",
            stacklevel=2,
        )
    return -(float(total) - math.log(terms.size))


def generic_bridge(model: Model, proposal, log_h: Callable,
                   posterior_xi, proposal_xi) -> float:
    """Two-sample bridge identity for an arbitrary bridge function.

    ``log_h`` maps an (n, d) matrix of draws to per-draw log bridge-function
    values.  The estimate is the log ratio of the proposal-draw average of
    ``unnormalized posterior x h`` to the posterior-draw average of
    ``h x proposal density``.
    """
    posterior_xi = np.atleast_2d(np.asarray(posterior_xi, dtype=float))
    proposal_xi = np.atleast_2d(np.asarray(proposal_xi, dtype=float))
    log_g = _as_log_density(proposal)
    log_num = eval_log_unnorm_post(model, proposal_xi) + np.asarray(
        log_h(proposal_xi), dtype=float
    )
    log_den = np.asarray(log_h(posterior_xi), dtype=float) + np.asarray(
        log_g(posterior_xi), dtype=float
    )
    num = log_mean_exp(log_num)
    den = log_mean_exp(log_den)
    if num == -np.inf or den == -np.inf:
        raise EstimationError("no overlap: a bridge-identity average vanished")
    return num - den


def iterate_bridge(log_l1: np.ndarray, log_l2: np.ndarray,
                   config: BridgeConfig | None = None,
                   stabilize: bool = True) -> BridgeIteration:
    """Fixed-point iteration for the optimal-bridge marginal likelihood.

    With ``stabilize`` the weights are shifted by the median of ``log_l1``
    before exponentiation, which keeps every term of the two sums near unit
    scale regardless of the model's likelihood magnitude; without it the raw
    ratios are iterated directly (useful only for cross-checking on
    well-scaled problems).  Convergence requires the relative change in the
    estimate to stay within tolerance on two consecutive iterations.
    """
    config = config or BridgeConfig()
    log_l1 = np.asarray(log_l1, dtype=float)
    log_l2 = np.asarray(log_l2, dtype=float)
    n1, n2 = log_l1.size, log_l2.size
    if n1 < 1 or n2 < 1:
        raise EstimationError("need draws from both the posterior and the proposal")
    s1 = n1 / (n1 + n2)
    s2 = n2 / (n1 + n2)
    shift = float(np.median(log_l1)) if stabilize else 0.0
    # Finite weights far below the shift are floored instead of letting exp
    # underflow to zero: only true zero-likelihood terms become exact zeros.
    with np.errstate(over="ignore"):
        e1 = np.exp(np.maximum(log_l1 - shift, -700.0))
        e2 = np.exp(np.maximum(log_l2 - shift, -700.0))
    e1[log_l1 == -np.inf] = 0.0
    e2[log_l2 == -np.inf] = 0.0
    # Zero-likelihood terms contribute 0 to the numerator; overflowed terms
    # contribute their bounded limit 1/s1.
    zero2 = e2 == 0.0
    inf2 = np.isinf(e2)
    clean = not (zero2.any() or inf2.any())

    r = config.initial_guess
    history: list[float] = []
    passes = 0
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            if clean:
                numerator = np.mean(e2 / (s1 * e2 + s2 * r))
            else:
                terms = e2 / (s1 * e2 + s2 * r)
                terms[zero2] = 0.0
                terms[inf2] = 1.0 / s1
                numerator = np.mean(terms)
            denominator = np.mean(1.0 / (s1 * e1 + s2 * r))
        r_new = numerator / denominator
        if not np.isfinite(r_new) or r_new <= 0.0:
            raise EstimationError(
                "bridge iteration degenerated: no overlap between the posterior "
                "and proposal draws"
            )
        history.append(math.log(r_new) + shift)
        if abs(r_new - r) / r_new <= config.tolerance:
            passes += 1
            if passes >= 2:
                converged = True
                r = r_new
                break
        else:
            passes = 0
        r = r_new
    if not converged:
        warnings.warn(
            f"bridge iteration did not converge within {config.max_iterations} iterations",
            stacklevel=2,
        )
    return BridgeIteration(
        log_ml=math.log(r) + shift,
        iterations=iterations,
        converged=converged,
        log_history=history,
    )


def bridge_from_draws(model: Model, proposal: MvnProposal, posterior,
                      proposal_xi: np.ndarray,
                      config: BridgeConfig | None = None) -> BridgeEstimate:
    """Optimal bridge from explicit draw sets (proposal already fitted).

    ``posterior`` is a SampleStore or an (n, d) matrix of iterate-half draws.
    """
    if isinstance(posterior, SampleStore):
        chains = posterior.chains
        posterior_xi = posterior.pooled()
    else:
        posterior_xi = np.atleast_2d(np.asarray(posterior, dtype=float))
        chains = [posterior_xi]
    proposal_xi = np.atleast_2d(np.asarray(proposal_xi, dtype=float))

    weights = LogWeights.from_model(model, proposal, posterior_xi, proposal_xi)
    result = iterate_bridge(weights.log_l1, weights.log_l2, config)
    report = re2_bridge(model, proposal, result.log_ml, chains, proposal_xi)
    return BridgeEstimate(
        log_ml=result.log_ml,
        iterations=result.iterations,
        converged=result.converged,
        re2=report.re2,
        cv_percent=report.cv_percent,
    )


def bridge_optimal(model: Model, store: SampleStore, n2: int,
                   config: BridgeConfig | None = None, seed=None) -> BridgeEstimate:
    """Full optimal-bridge pipeline from a store of posterior draws.

    The store is split per chain, a moment-matched normal proposal is fitted
    on the first halves, ``n2`` proposal draws are generated from the seed,
    and the shifted iteration runs on the second halves.  Non-convergence is
    reported through the ``converged`` flag, never silently.
    """
    if n2 < 1:
        raise ValueError("need at least one proposal draw")
    fit_half, iterate_half = split_halves(store)
    proposal = fit_mvn_moments(fit_half.pooled())
    proposal_xi = proposal.sample(n2, seed)
    return bridge_from_draws(model, proposal, iterate_half, proposal_xi, config)
