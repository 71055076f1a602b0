"""Marginal-likelihood estimation toolkit.

Bridge sampling and its three special-case estimators (naive Monte Carlo,
importance sampling, generalized harmonic mean), an adaptive random-walk
Metropolis sampler, error quantification for the bridge estimate, and
reference models: beta-binomial plus individual and hierarchical
expectancy-valence models for the Iowa gambling task.
"""

from .accuracy import ErrorReport, re2_bridge, spectrum0_ar
from .compare import (
    ModelComparison,
    bayes_factor,
    find_intersection,
    log_bayes_factor,
    posterior_model_probs,
    savage_dickey,
)
from .estimators import (
    BridgeConfig,
    BridgeEstimate,
    LogWeights,
    bridge_from_draws,
    bridge_optimal,
    generalized_harmonic_mean,
    generic_bridge,
    importance_sampling,
    iterate_bridge,
    naive_mc,
)
from .exceptions import (
    BoundaryError,
    DataError,
    DiagnosticError,
    DomainError,
    EstimationError,
    FitError,
    MarginalisError,
    SamplingError,
)
from .igt import (
    GroupLevel,
    PayoffScheme,
    SimConfig,
    default_scheme,
    draw_payoff,
    load_igt_csv,
    save_igt_csv,
    simulate,
)
from .models import (
    BetaBinomialData,
    EVParams,
    HierParams,
    IGTRecord,
    Model,
    bb_analytic_log_ml,
    bb_log_likelihood,
    bb_posterior_params,
    beta_binomial_model,
    ev_hierarchical_model,
    ev_individual_log_unnorm_post,
    ev_individual_model,
    ev_log_likelihood,
    ev_trial_probabilities,
    hier_ev_log_unnorm_post,
)
from .paramspace import (
    ParameterSpace,
    ParameterSpec,
    from_unconstrained,
    log_jacobian,
    to_unconstrained,
)
from .proposal import (
    BetaMixtureIS,
    MvnProposal,
    beta_params_from_moments,
    fit_beta_moments,
    fit_mvn_moments,
)
from .sampler import SampleStore, SamplerConfig, r_hat, run_mcmc, split_halves

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
