"""Model interface and the three reference models.

A ``Model`` wraps a log unnormalized posterior over unconstrained coordinates
(log-likelihood + log-prior + log-Jacobian).  Implemented here: the
beta-binomial rate model, the three-parameter expectancy-valence model for
single Iowa-gambling-task records, and its hierarchical group-level extension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .exceptions import DataError, DomainError
from .paramspace import (
    ParameterSpace,
    ParameterSpec,
    norm_cdf,
    norm_log_pdf,
    norm_quantile,
)

_LOG_QUARTER = math.log(0.25)
_N_DECKS = 4

try:  # optional compiled fast path for the trial-replay kernel
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class BlockStructure:
    """Conditional-independence decomposition for blocked Metropolis sweeps.

    ``parallel_indices`` lists, per block, the coordinate columns of blocks
    that are mutually independent given the remaining (joint) coordinates.
    ``par_loglik`` is the expensive per-block likelihood, ``par_extra`` the
    cheap per-block density terms that also involve joint coordinates, and
    ``joint_only`` the terms involving no parallel block.  The model's total
    log density must equal ``par_loglik.sum() + par_extra.sum() + joint_only``.
    """

    parallel_indices: np.ndarray
    joint_indices: np.ndarray
    par_loglik: Callable[[np.ndarray], np.ndarray]
    par_extra: Callable[[np.ndarray], np.ndarray]
    joint_only: Callable[[np.ndarray], float]


@dataclass(frozen=True)
class Model:
    """Evaluatable log unnormalized posterior over unconstrained coordinates.

    ``log_unnorm_post`` maps a single coordinate vector to a float and must be
    deterministic and finite for all finite inputs (-inf only where the
    likelihood is exactly zero).  ``log_unnorm_post_many``, when present,
    evaluates a whole (n, d) matrix of draws at once.  ``block_structure``
    advertises a conditional-independence decomposition that the sampler can
    exploit.
    """

    space: ParameterSpace
    log_unnorm_post: Callable[[np.ndarray], float]
    label: str
    log_unnorm_post_many: Callable[[np.ndarray], np.ndarray] | None = None
    block_structure: BlockStructure | None = None

    @property
    def dimension(self) -> int:
        return self.space.dimension


def eval_log_unnorm_post(model: Model, xis: np.ndarray) -> np.ndarray:
    """Evaluate a model at a matrix of draws, using the batch path if available."""
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    if model.log_unnorm_post_many is not None:
        return np.asarray(model.log_unnorm_post_many(xis), dtype=float)
    return np.array([model.log_unnorm_post(x) for x in xis], dtype=float)


# ---------------------------------------------------------------------------
# Beta-binomial model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BetaBinomialData:
    """k successes out of n trials."""

    k: int
    n: int

    def __post_init__(self):
        if self.k < 0 or self.n < 0 or self.k > self.n:
            raise DataError(f"need 0 <= k <= n, got k={self.k}, n={self.n}")


def bb_log_likelihood(data: BetaBinomialData, theta: float) -> float:
    """Binomial log PMF of the data at rate theta in (0, 1)."""
    if not 0.0 < theta < 1.0:
        raise DomainError(f"rate must lie strictly inside (0, 1), got {theta}")
    k, n = data.k, data.n
    if n == 0:
        return 0.0
    log_choose = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return log_choose + k * math.log(theta) + (n - k) * math.log1p(-theta)


def bb_analytic_log_ml(data: BetaBinomialData, alpha: float = 1.0, beta: float = 1.0) -> float:
    """Closed-form log marginal likelihood under a Beta(alpha, beta) prior.

    The default uniform prior gives ``-log(n + 1)``.
    """
    k, n = data.k, data.n
    log_choose = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return float(log_choose + special.betaln(k + alpha, n - k + beta) - special.betaln(alpha, beta))


def bb_posterior_params(data: BetaBinomialData) -> tuple[float, float]:
    """Beta posterior shape parameters under the uniform prior: (k+1, n-k+1)."""
    return (data.k + 1.0, data.n - data.k + 1.0)


def beta_binomial_model(
    data: BetaBinomialData, prior_alpha: float = 1.0, prior_beta: float = 1.0
) -> Model:
    """Beta-binomial model in probit-transformed coordinates."""
    space = ParameterSpace([ParameterSpec.interval("theta", 0.0, 1.0)])
    k, n = data.k, data.n
    log_choose = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    prior_const = -float(special.betaln(prior_alpha, prior_beta))

    def many(xis: np.ndarray) -> np.ndarray:
        xi = np.asarray(xis, dtype=float)[..., 0]
        # log(theta) and log(1 - theta) via log_ndtr stay finite into the far
        # tails, where the plain CDF saturates.
        log_theta = special.log_ndtr(xi)
        log_comp = special.log_ndtr(-xi)
        log_lik = (
            np.zeros_like(xi) if n == 0
            else log_choose + k * log_theta + (n - k) * log_comp
        )
        log_prior = (
            prior_const
            + (prior_alpha - 1.0) * log_theta
            + (prior_beta - 1.0) * log_comp
        )
        return log_lik + log_prior + norm_log_pdf(xi)

    return Model(
        space=space,
        log_unnorm_post=lambda xi: float(many(np.asarray(xi)[None, :])[0]),
        label=f"beta-binomial(k={k}, n={n})",
        log_unnorm_post_many=many,
    )


# ---------------------------------------------------------------------------
# Expectancy-valence model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EVParams:
    """Attention weight w, updating rate a, and rescaled consistency c, all in [0, 1].

    The native consistency exponent is recovered as ``c_prime = 4c - 2``.
    """

    w: float
    a: float
    c: float

    def __post_init__(self):
        for name, value in (("w", self.w), ("a", self.a), ("c", self.c)):
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"EV parameter {name} must lie in [0, 1], got {value}")

    @property
    def c_prime(self) -> float:
        return 4.0 * self.c - 2.0


@dataclass(frozen=True)
class IGTRecord:
    """One participant's task data: deck choices with their rewards and losses."""

    subject: str
    choices: np.ndarray
    rewards: np.ndarray
    losses: np.ndarray

    def __post_init__(self):
        choices = np.asarray(self.choices, dtype=np.int64)
        rewards = np.asarray(self.rewards, dtype=float)
        losses = np.asarray(self.losses, dtype=float)
        if not (choices.shape == rewards.shape == losses.shape) or choices.ndim != 1:
            raise DataError(f"subject {self.subject!r}: unequal trial sequences")
        if choices.size and (choices.min() < 1 or choices.max() > _N_DECKS):
            raise DataError(f"subject {self.subject!r}: deck index outside 1..4")
        if np.any(rewards < 0.0):
            raise DataError(f"subject {self.subject!r}: rewards must be non-negative")
        if np.any(losses > 0.0):
            raise DataError(f"subject {self.subject!r}: losses must be non-positive")
        object.__setattr__(self, "choices", choices)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "losses", losses)

    @property
    def n_trials(self) -> int:
        return self.choices.size

    @property
    def net_outcomes(self) -> np.ndarray:
        return self.rewards + self.losses


def _ev_loglik_numpy(w, a, cp, choices, rewards, losses):
    """Replay the delta rule and softmax over trials for a batch of parameter rows.

    w, a, cp have shape (B, S); choices/rewards/losses have shape (S, T) with
    0-based deck indices.  Returns per-(draw, subject) log-likelihoods (B, S).
    """
    n_batch, n_subj = w.shape
    n_trials = choices.shape[1]
    ev = np.zeros((n_batch, n_subj, _N_DECKS))
    ll = np.zeros((n_batch, n_subj))
    sidx = np.arange(n_subj)
    for t in range(n_trials):
        k = choices[:, t]
        if t > 0:
            theta = (t / 10.0) ** cp
            z = theta[..., None] * ev
            zmax = z.max(axis=-1)
            lse = zmax + np.log(np.exp(z - zmax[..., None]).sum(axis=-1))
            ll += z[:, sidx, k] - lse
        else:
            # All expectancies are zero before the first outcome: uniform choice.
            ll += _LOG_QUARTER
        v = (1.0 - w) * rewards[:, t] + w * losses[:, t]
        evk = ev[:, sidx, k]
        ev[:, sidx, k] = evk + a * (v - evk)
    return ll


if _HAVE_NUMBA:

    @njit(cache=True)
    def _ev_loglik_jit(w, a, cp, choices, rewards, losses):  # pragma: no cover
        n_batch, n_subj = w.shape
        n_trials = choices.shape[1]
        out = np.empty((n_batch, n_subj))
        for b in range(n_batch):
            for s in range(n_subj):
                ev = np.zeros(4)
                ll = 0.0
                ws = w[b, s]
                as_ = a[b, s]
                cps = cp[b, s]
                for t in range(n_trials):
                    k = choices[s, t]
                    if t > 0:
                        th = (t / 10.0) ** cps
                        z0 = th * ev[0]
                        z1 = th * ev[1]
                        z2 = th * ev[2]
                        z3 = th * ev[3]
                        m = max(max(z0, z1), max(z2, z3))
                        sumexp = (
                            np.exp(z0 - m) + np.exp(z1 - m) + np.exp(z2 - m) + np.exp(z3 - m)
                        )
                        if k == 0:
                            zk = z0
                        elif k == 1:
                            zk = z1
                        elif k == 2:
                            zk = z2
                        else:
                            zk = z3
                        ll += zk - m - np.log(sumexp)
                    else:
                        ll += _LOG_QUARTER
                    v = (1.0 - ws) * rewards[s, t] + ws * losses[s, t]
                    ev[k] = ev[k] + as_ * (v - ev[k])
                out[b, s] = ll
        return out

    _ev_loglik_batch = _ev_loglik_jit
else:
    _ev_loglik_batch = _ev_loglik_numpy


def _record_arrays(record: IGTRecord):
    return (
        np.ascontiguousarray(record.choices - 1),
        np.ascontiguousarray(record.rewards),
        np.ascontiguousarray(record.losses),
    )


def ev_trial_probabilities(params: EVParams, history: IGTRecord) -> np.ndarray:
    """Choice probabilities for the trial following ``history``.

    Replays the utility/delta-rule updates over the given trials, then applies
    the trial-indexed softmax.  With no history (or a zero updating rate) all
    four decks are equally likely.
    """
    t = history.n_trials
    if t == 0:
        return np.full(_N_DECKS, 0.25)
    ev = np.zeros(_N_DECKS)
    choices, rewards, losses = _record_arrays(history)
    for i in range(t):
        k = choices[i]
        v = (1.0 - params.w) * rewards[i] + params.w * losses[i]
        ev[k] += params.a * (v - ev[k])
    z = (t / 10.0) ** params.c_prime * ev
    z -= z.max()
    p = np.exp(z)
    return p / p.sum()


def ev_log_likelihood(params: EVParams, record: IGTRecord) -> float:
    """Log probability of the observed choice sequence under the EV model."""
    if record.n_trials == 0:
        return 0.0
    choices, rewards, losses = _record_arrays(record)
    w = np.array([[params.w]])
    a = np.array([[params.a]])
    cp = np.array([[params.c_prime]])
    out = _ev_loglik_batch(w, a, cp, choices[None, :], rewards[None, :], losses[None, :])
    return float(out[0, 0])


def ev_individual_log_unnorm_post(xi: np.ndarray, record: IGTRecord) -> float:
    """Log unnormalized posterior of one participant in probit coordinates.

    Uniform priors on the unit-scale parameters plus the probit Jacobian give
    a standard normal term per coordinate.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (3,):
        raise DataError(f"expected a 3-vector, got shape {xi.shape}")
    return float(ev_individual_model(record).log_unnorm_post(xi))


def ev_individual_model(record: IGTRecord) -> Model:
    """Three-parameter EV model for a single record, in probit coordinates."""
    space = ParameterSpace(
        [
            ParameterSpec.interval("w", 0.0, 1.0),
            ParameterSpec.interval("a", 0.0, 1.0),
            ParameterSpec.interval("c", 0.0, 1.0),
        ]
    )
    choices, rewards, losses = _record_arrays(record)
    empty = record.n_trials == 0

    def many(xis: np.ndarray) -> np.ndarray:
        xis = np.asarray(xis, dtype=float)
        u = norm_cdf(xis)
        prior = norm_log_pdf(xis).sum(axis=-1)
        if empty:
            return prior
        w = np.ascontiguousarray(u[:, 0:1])
        a = np.ascontiguousarray(u[:, 1:2])
        cp = np.ascontiguousarray(4.0 * u[:, 2:3] - 2.0)
        ll = _ev_loglik_batch(w, a, cp, choices[None, :], rewards[None, :], losses[None, :])
        return ll[:, 0] + prior

    return Model(
        space=space,
        log_unnorm_post=lambda xi: float(many(np.asarray(xi)[None, :])[0]),
        label=f"ev-individual({record.subject})",
        log_unnorm_post_many=many,
    )


# ---------------------------------------------------------------------------
# Hierarchical expectancy-valence model
# ---------------------------------------------------------------------------

_GROUP_MEANS = ("mu_w", "mu_a", "mu_c")
_GROUP_TAUS = ("tau_w", "tau_a", "tau_c")
_SD_SCALE = 1.5  # group standard deviations live on (0, 1.5)


@dataclass(frozen=True)
class HierParams:
    """Structured view of a hierarchical parameter vector.

    Per-subject probit-scale triples, the three group means, and the group
    standard deviations already mapped back to (0, 1.5).
    """

    omega: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if not (omega.shape == alpha.shape == gamma.shape) or omega.ndim != 1 or omega.size < 1:
            raise DataError("per-subject parameter blocks must be equal-length vectors")
        if mu.shape != (3,) or sigma.shape != (3,):
            raise DataError("group-level blocks must each hold three values")
        if np.any(sigma <= 0.0) or np.any(sigma >= _SD_SCALE):
            raise DomainError(f"group standard deviations must lie strictly in (0, {_SD_SCALE})")
        for name, value in (("omega", omega), ("alpha", alpha), ("gamma", gamma),
                            ("mu", mu), ("sigma", sigma)):
            object.__setattr__(self, name, value)

    @property
    def n_subjects(self) -> int:
        return self.omega.size

    @classmethod
    def from_unconstrained(cls, xi: np.ndarray, n_subjects: int) -> "HierParams":
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (3 * n_subjects + 6,):
            raise DataError(
                f"expected {3 * n_subjects + 6} coordinates for {n_subjects} subjects, "
                f"got {xi.shape}"
            )
        s = n_subjects
        tail = xi[3 * s:]
        return cls(
            omega=xi[:s],
            alpha=xi[s:2 * s],
            gamma=xi[2 * s:3 * s],
            mu=tail[0::2],
            sigma=_SD_SCALE * norm_cdf(tail[1::2]),
        )

    def to_unconstrained(self) -> np.ndarray:
        tau = norm_quantile(self.sigma / _SD_SCALE)
        tail = np.empty(6)
        tail[0::2] = self.mu
        tail[1::2] = tau
        return np.concatenate([self.omega, self.alpha, self.gamma, tail])


def hierarchical_space(n_subjects: int, pinned: Sequence[str] = ()) -> ParameterSpace:
    """Coordinate layout: subject blocks, then interleaved (mean, tau) per parameter."""
    specs = [ParameterSpec.real_line(f"omega_{s + 1}") for s in range(n_subjects)]
    specs += [ParameterSpec.real_line(f"alpha_{s + 1}") for s in range(n_subjects)]
    specs += [ParameterSpec.real_line(f"gamma_{s + 1}") for s in range(n_subjects)]
    for mean_name, tau_name in zip(_GROUP_MEANS, _GROUP_TAUS):
        if mean_name not in pinned:
            specs.append(ParameterSpec.real_line(mean_name))
        specs.append(ParameterSpec.real_line(tau_name))
    return ParameterSpace(specs)


def ev_hierarchical_model(
    records: Sequence[IGTRecord], pinned: dict[str, float] | None = None
) -> Model:
    """Hierarchical EV model over all subjects, in fully unconstrained coordinates.

    Subject-level probit parameters get normal group distributions whose means
    carry standard normal priors and whose standard deviations are
    ``1.5 * ndtr(tau)`` with standard normal priors on tau (the uniform(0, 1.5)
    prior after the change of variables).  ``pinned`` fixes named group means
    to constants and removes them from the parameter space, which is how the
    restricted models for Bayes-factor checks are built.
    """
    pinned = dict(pinned or {})
    for key in pinned:
        if key not in _GROUP_MEANS:
            raise DataError(f"only group means {_GROUP_MEANS} can be pinned, got {key!r}")
    n_subj = len(records)
    if n_subj < 1:
        raise DataError("need at least one record")
    space = hierarchical_space(n_subj, pinned=tuple(pinned))

    lengths = {r.n_trials for r in records}
    uniform_t = len(lengths) == 1
    if uniform_t and lengths != {0}:
        choices = np.ascontiguousarray(np.stack([r.choices - 1 for r in records]))
        rewards = np.ascontiguousarray(np.stack([r.rewards for r in records]))
        losses = np.ascontiguousarray(np.stack([r.losses for r in records]))
    else:
        per_subject = [_record_arrays(r) for r in records]

    free_means = [m for m in _GROUP_MEANS if m not in pinned]

    def split(xis: np.ndarray):
        """Subject blocks plus the (mu, tau) matrices, pinned means filled in."""
        n = xis.shape[0]
        omega = xis[:, :n_subj]
        alpha = xis[:, n_subj:2 * n_subj]
        gamma = xis[:, 2 * n_subj:3 * n_subj]
        tail = xis[:, 3 * n_subj:]
        mu = np.empty((n, 3))
        tau = np.empty((n, 3))
        col = 0
        for j, mean_name in enumerate(_GROUP_MEANS):
            if mean_name in pinned:
                mu[:, j] = pinned[mean_name]
            else:
                mu[:, j] = tail[:, col]
                col += 1
            tau[:, j] = tail[:, col]
            col += 1
        return omega, alpha, gamma, mu, tau

    def loglik(omega, alpha, gamma) -> np.ndarray:
        """(n, S) per-subject choice log-likelihoods."""
        w = norm_cdf(omega)
        a = norm_cdf(alpha)
        cp = 4.0 * norm_cdf(gamma) - 2.0
        if uniform_t:
            if lengths == {0}:
                return np.zeros(omega.shape)
            return _ev_loglik_batch(w, a, cp, choices, rewards, losses)
        out = np.zeros(omega.shape)
        for s, (ch, rw, lo) in enumerate(per_subject):
            if ch.size == 0:
                continue
            out[:, s] = _ev_loglik_batch(
                np.ascontiguousarray(w[:, s:s + 1]),
                np.ascontiguousarray(a[:, s:s + 1]),
                np.ascontiguousarray(cp[:, s:s + 1]),
                ch[None, :], rw[None, :], lo[None, :],
            )[:, 0]
        return out

    def group_terms(omega, alpha, gamma, mu, tau) -> np.ndarray:
        """(n, S) group-level normal log-density per subject.

        A saturated tau gives a group sd of exactly zero: zero density.
        """
        sigma = _SD_SCALE * norm_cdf(tau)
        degenerate = np.any(sigma <= 0.0, axis=1)
        sigma = np.where(sigma > 0.0, sigma, 1.0)
        out = np.zeros(omega.shape)
        for j, block in enumerate((omega, alpha, gamma)):
            dev = (block - mu[:, j:j + 1]) / sigma[:, j:j + 1]
            out += norm_log_pdf(dev) - np.log(sigma[:, j])[:, None]
        out[degenerate] = -np.inf
        return out

    def prior_terms(mu, tau) -> np.ndarray:
        """(n,) standard normal priors on the free means and all taus."""
        total = np.zeros(mu.shape[0])
        for j, mean_name in enumerate(_GROUP_MEANS):
            if mean_name in free_means:
                total += norm_log_pdf(mu[:, j])
            total += norm_log_pdf(tau[:, j])
        return total

    def many(xis: np.ndarray) -> np.ndarray:
        xis = np.asarray(xis, dtype=float)
        if xis.shape[1] != space.dimension:
            raise DataError(
                f"layout mismatch: expected {space.dimension} coordinates, got {xis.shape[1]}"
            )
        omega, alpha, gamma, mu, tau = split(xis)
        return (
            loglik(omega, alpha, gamma).sum(axis=1)
            + group_terms(omega, alpha, gamma, mu, tau).sum(axis=1)
            + prior_terms(mu, tau)
        )

    def par_loglik(xi: np.ndarray) -> np.ndarray:
        omega, alpha, gamma, _, _ = split(xi[None, :])
        return loglik(omega, alpha, gamma)[0]

    def par_extra(xi: np.ndarray) -> np.ndarray:
        omega, alpha, gamma, mu, tau = split(xi[None, :])
        return group_terms(omega, alpha, gamma, mu, tau)[0]

    def joint_only(xi: np.ndarray) -> float:
        _, _, _, mu, tau = split(xi[None, :])
        return float(prior_terms(mu, tau)[0])

    structure = BlockStructure(
        parallel_indices=np.array(
            [[s, n_subj + s, 2 * n_subj + s] for s in range(n_subj)]
        ),
        joint_indices=np.arange(3 * n_subj, space.dimension),
        par_loglik=par_loglik,
        par_extra=par_extra,
        joint_only=joint_only,
    )

    label = f"ev-hierarchical(S={n_subj})"
    if pinned:
        label += " pinned " + ", ".join(f"{k}={v:g}" for k, v in sorted(pinned.items()))
    return Model(
        space=space,
        log_unnorm_post=lambda xi: float(many(np.asarray(xi)[None, :])[0]),
        label=label,
        log_unnorm_post_many=many,
        block_structure=structure,
    )


def hier_ev_log_unnorm_post(xi: np.ndarray, records: Sequence[IGTRecord]) -> float:
    """Full-layout hierarchical log unnormalized posterior (no pinning)."""
    xi = np.asarray(xi, dtype=float)
    expected = 3 * len(records) + 6
    if xi.shape != (expected,):
        raise DataError(f"layout mismatch: expected {expected} coordinates, got {xi.shape}")
    return float(ev_hierarchical_model(records).log_unnorm_post(xi))
