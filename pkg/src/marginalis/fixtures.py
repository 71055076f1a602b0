"""Baked-in worked example for the beta-binomial model (k=2 out of n=10).

These are the printed two-decimal draws of the standard worked example for
the four estimators; running them through the real estimator code reproduces
the familiar reference values 0.0945, 0.0827, 0.092, and 0.0902 (first bridge
iterate 0.0908).  Because the draws are rounded to the printed precision, the
reproduction tolerance is one unit in the last printed digit.
"""

from __future__ import annotations

import numpy as np

from .estimators import (
    BridgeConfig,
    LogWeights,
    generalized_harmonic_mean,
    importance_sampling,
    iterate_bridge,
    naive_mc,
)
from .models import BetaBinomialData, bb_log_likelihood, beta_binomial_model
from .proposal import BetaMixtureIS, MvnProposal, fit_mvn_moments

K, N = 2, 10

# 12 draws from the uniform prior (naive Monte Carlo section).
PRIOR_DRAWS = np.array(
    [0.58, 0.76, 0.03, 0.93, 0.27, 0.97, 0.45, 0.46, 0.18, 0.64, 0.06, 0.15]
)

# 24 draws from the Beta(3, 9) posterior; the first 12 feed the moment fits.
POSTERIOR_DRAWS = np.array(
    [0.22, 0.16, 0.09, 0.35, 0.06, 0.27, 0.26, 0.41, 0.20, 0.43, 0.21, 0.12,
     0.15, 0.21, 0.24, 0.18, 0.12, 0.22, 0.15, 0.22, 0.23, 0.26, 0.29, 0.28]
)

# Probit transforms of the two posterior batches, at printed precision.
PROBIT_BATCH_1 = np.array(
    [-0.77, -0.99, -1.34, -0.39, -1.55, -0.61, -0.64, -0.23, -0.84, -0.18, -0.81, -1.17]
)
PROBIT_BATCH_2 = np.array(
    [-1.04, -0.81, -0.71, -0.92, -1.17, -0.77, -1.04, -0.77, -0.74, -0.64, -0.55, -0.58]
)

# 12 draws from the beta-mixture importance density (gamma = 0.3 on uniform).
MIXTURE_DRAWS = np.array(
    [0.11, 0.07, 0.32, 0.25, 0.41, 0.39, 0.25, 0.13, 0.64, 0.26, 0.74, 0.92]
)
MIXTURE_GAMMA = 0.30
MIXTURE_ALPHA = 2.721
MIXTURE_BETA = 9.006

# Normal importance density for the harmonic-mean section: the moment fit to
# the first probit batch, with the standard deviation shrunk by 1.5.
GHM_MU = -0.793
GHM_SIGMA = 0.423 / 1.5

# 12 draws from the fitted bridge proposal.
PROPOSAL_DRAWS = np.array(
    [-1.11, -0.63, -1.48, -0.59, -0.48, -0.69, -0.74, -0.51, -0.82, -1.54, -0.76, -0.96]
)


class _FixedDraws:
    """Importance density whose sampler replays a fixed draw vector."""

    def __init__(self, density, draws: np.ndarray):
        self._density = density
        self._draws = np.asarray(draws, dtype=float)

    def sample(self, n: int, seed) -> np.ndarray:
        if n != self._draws.size:
            raise ValueError(f"fixture holds exactly {self._draws.size} draws")
        return self._draws

    def log_pdf(self, theta):
        return self._density.log_pdf(theta)


def running_example() -> dict:
    """All four estimates from the baked-in draws, on the probability scale."""
    data = BetaBinomialData(k=K, n=N)
    model = beta_binomial_model(data)

    def loglik(thetas: np.ndarray) -> np.ndarray:
        return np.array([bb_log_likelihood(data, t) for t in thetas])

    log_naive = naive_mc(
        loglik, lambda rng, n: PRIOR_DRAWS, n=PRIOR_DRAWS.size, seed=0
    )

    mixture = _FixedDraws(
        BetaMixtureIS(gamma=MIXTURE_GAMMA, alpha=MIXTURE_ALPHA, beta=MIXTURE_BETA),
        MIXTURE_DRAWS,
    )
    # Uniform prior: the unnormalized posterior on (0, 1) is the likelihood.
    log_is = importance_sampling(loglik, mixture, n=MIXTURE_DRAWS.size, seed=0)

    ghm_density = MvnProposal(mean=[GHM_MU], covariance=[[GHM_SIGMA**2]])
    log_ghm = generalized_harmonic_mean(model, ghm_density, PROBIT_BATCH_1[:, None])

    proposal = fit_mvn_moments(PROBIT_BATCH_1)
    weights = LogWeights.from_model(
        model, proposal, PROBIT_BATCH_2[:, None], PROPOSAL_DRAWS[:, None]
    )
    bridge = iterate_bridge(weights.log_l1, weights.log_l2, BridgeConfig())

    return {
        "k": K,
        "n": N,
        "analytic": 1.0 / (N + 1),
        "naive_mc": float(np.exp(log_naive)),
        "importance_sampling": float(np.exp(log_is)),
        "generalized_harmonic_mean": float(np.exp(log_ghm)),
        "bridge": float(np.exp(bridge.log_ml)),
        "bridge_first_iterate": float(np.exp(bridge.log_history[0])),
        "bridge_iterations": bridge.iterations,
        "bridge_converged": bridge.converged,
        "proposal_mean": float(proposal.mean[0]),
        "proposal_sd": float(np.sqrt(proposal.covariance[0, 0])),
    }
