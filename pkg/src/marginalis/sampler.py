"""Adaptive random-walk Metropolis sampling with chains, burn-in, and diagnostics.

Proposal scales are per-coordinate: a running estimate of each coordinate's
posterior standard deviation times a global step factor steered by
Robbins-Monro toward the target acceptance rate.  Adaptation happens only
during burn-in; the scales are frozen afterwards so retained draws come from a
fixed-kernel chain.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, DiagnosticError, SamplingError
from .models import Model
from .paramspace import ParameterSpace

logger = logging.getLogger(__name__)

_RHAT_DIVERGED = 1e6  # stand-in for an infinite potential scale reduction


@dataclass(frozen=True)
class SamplerConfig:
    """Chain layout and reproducibility settings.

    ``iterations`` counts post-burn-in proposals per chain; every ``thin``-th
    state is retained, so each chain keeps ``iterations / thin`` draws.
    """

    chains: int
    iterations: int
    burn_in: int
    seed: int
    thin: int = 1
    target_acceptance: float = 0.234

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("need at least one chain")
        if self.iterations < 1:
            raise SamplingError("zero retained iterations: increase iterations")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if self.thin < 1 or self.iterations % self.thin != 0:
            raise ValueError("iterations must be a positive multiple of thin")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ValueError("target_acceptance must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def retained_per_chain(self) -> int:
        return self.iterations // self.thin


@dataclass
class SampleStore:
    """Per-chain matrices of retained draws in unconstrained coordinates."""

    chains: list[np.ndarray]
    space: ParameterSpace
    config: SamplerConfig | None = None
    acceptance_rates: list[float] | None = None

    def __post_init__(self):
        chains = [np.atleast_2d(np.asarray(c, dtype=float)) for c in self.chains]
        if not chains:
            raise SamplingError("a sample store needs at least one chain")
        shape = chains[0].shape
        if any(c.shape != shape for c in chains):
            raise SamplingError("all chains must share the same shape")
        if shape[0] < 1:
            raise SamplingError("empty chains are not allowed")
        if shape[1] != self.space.dimension:
            raise DataError(
                f"draws have {shape[1]} coordinates, space has {self.space.dimension}"
            )
        if any(not np.all(np.isfinite(c)) for c in chains):
            raise SamplingError("sample stores must contain only finite values")
        self.chains = chains

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    @property
    def retained_per_chain(self) -> int:
        return self.chains[0].shape[0]

    @property
    def dimension(self) -> int:
        return self.chains[0].shape[1]

    def pooled(self) -> np.ndarray:
        return np.concatenate(self.chains, axis=0)

    def save_csv(self, path) -> None:
        """Write ``chain,iter,<param names...>`` rows at full float precision."""
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["chain", "iter", *self.space.names])
            for c, chain in enumerate(self.chains):
                for i, row in enumerate(chain):
                    writer.writerow([c, i, *(format(v, ".17g") for v in row)])

    @classmethod
    def load_csv(cls, path, space: ParameterSpace) -> "SampleStore":
        """Reload a store written by ``save_csv``; values round-trip bit-exactly."""
        with open(path, "r", newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or header[:2] != ["chain", "iter"]:
                raise DataError(f"{path}: missing 'chain,iter,...' header")
            if tuple(header[2:]) != space.names:
                raise DataError(f"{path}: parameter names do not match the given space")
            by_chain: dict[int, list[list[float]]] = {}
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 2 + space.dimension:
                    raise DataError(f"{path}:{lineno}: wrong column count")
                by_chain.setdefault(int(row[0]), []).append([float(v) for v in row[2:]])
        chains = [np.asarray(by_chain[c]) for c in sorted(by_chain)]
        return cls(chains=chains, space=space)


def run_mcmc(model: Model, config: SamplerConfig) -> SampleStore:
    """Sample the model's posterior; deterministic given the seed.

    Each chain gets an independent stream spawned from the master seed and
    starts from iid standard normal coordinates.  A NaN log-density aborts the
    run with the offending coordinates reported.
    """
    dim = model.space.dimension
    if dim < 1:
        raise SamplingError("model dimension must be at least 1")
    runner = _run_chain if model.block_structure is None else _run_blocked_chain
    streams = np.random.SeedSequence(config.seed).spawn(config.chains)
    chains = []
    rates = []
    for c, stream in enumerate(streams):
        draws, rate = runner(model, config, np.random.default_rng(stream))
        logger.info("chain %d acceptance rate %.3f", c, rate)
        chains.append(draws)
        rates.append(rate)
    return SampleStore(chains=chains, space=model.space, config=config, acceptance_rates=rates)


def _log_post(model: Model, xi: np.ndarray) -> float:
    value = float(model.log_unnorm_post(xi))
    if math.isnan(value):
        raise SamplingError(f"model returned NaN at xi={xi!r}")
    return value


def _run_chain(model: Model, config: SamplerConfig, rng: np.random.Generator):
    dim = model.space.dimension
    xi = rng.standard_normal(dim)
    lp = _log_post(model, xi)

    log_step = math.log(2.38 / math.sqrt(dim))
    sigma = np.ones(dim)
    # Per-coordinate moments are collected in restarting windows (quarters of
    # burn-in), so early-transient states stop influencing the final scales.
    restarts = {config.burn_in // 4, config.burn_in // 2, (3 * config.burn_in) // 4}
    mean = np.zeros(dim)
    m2 = np.zeros(dim)
    count = 0

    for i in range(config.burn_in):
        if i in restarts:
            mean = np.zeros(dim)
            m2 = np.zeros(dim)
            count = 0
        prop = xi + math.exp(log_step) * sigma * rng.standard_normal(dim)
        lp_prop = _log_post(model, prop)
        alpha = 1.0 if lp_prop >= lp else math.exp(lp_prop - lp)
        if rng.random() < alpha:
            xi, lp = prop, lp_prop
        gain = min(0.25, (i + 1) ** -0.6)
        log_step += gain * (alpha - config.target_acceptance)
        count += 1
        delta = xi - mean
        mean += delta / count
        m2 += delta * (xi - mean)
        if count >= 200 and count % 100 == 0:
            est = np.sqrt(m2 / (count - 1))
            floor = 1e-6 * max(float(est.max()), 1.0)
            sigma = np.maximum(est, floor)

    scale = math.exp(log_step) * sigma
    retained = np.empty((config.retained_per_chain, dim))
    accepted = 0
    kept = 0
    for i in range(config.iterations):
        prop = xi + scale * rng.standard_normal(dim)
        lp_prop = _log_post(model, prop)
        if lp_prop >= lp or rng.random() < math.exp(lp_prop - lp):
            xi, lp = prop, lp_prop
            accepted += 1
        if (i + 1) % config.thin == 0:
            retained[kept] = xi
            kept += 1
    return retained, accepted / config.iterations


def _run_blocked_chain(model: Model, config: SamplerConfig, rng: np.random.Generator):
    """Blocked Metropolis sweeps for models with a conditional-independence split.

    Each sweep proposes all parallel blocks at once (their acceptances are
    independent given the joint block, so one batched likelihood call serves
    every block) and then the joint block, whose update needs no likelihood
    re-evaluation.  Scale adaptation mirrors the joint-update chain: diagonal
    per-coordinate scales from windowed moments, with one Robbins-Monro step
    factor per parallel block and one for the joint block.
    """
    structure = model.block_structure
    dim = model.space.dimension
    par_idx = structure.parallel_indices
    joint_idx = structure.joint_indices
    n_blocks, block_dim = par_idx.shape
    n_joint = joint_idx.size

    def checked(values):
        values = np.asarray(values, dtype=float)
        if np.any(np.isnan(values)):
            raise SamplingError("model returned NaN during a blocked sweep")
        return values

    xi = rng.standard_normal(dim)
    lik = checked(structure.par_loglik(xi))

    log_step_par = np.full(n_blocks, math.log(2.38 / math.sqrt(block_dim)))
    log_step_joint = math.log(2.38 / math.sqrt(max(n_joint, 1)))
    sigma = np.ones(dim)
    restarts = {config.burn_in // 4, config.burn_in // 2, (3 * config.burn_in) // 4}
    mean = np.zeros(dim)
    m2 = np.zeros(dim)
    count = 0

    target = config.target_acceptance
    total = config.burn_in + config.iterations
    retained = np.empty((config.retained_per_chain, dim))
    kept = 0
    accepted_updates = 0

    for i in range(total):
        adapting = i < config.burn_in
        # Parallel blocks: one simultaneous proposal, per-block accept/reject.
        prop = xi.copy()
        flat = par_idx.ravel()
        prop[flat] = (
            xi[flat]
            + (np.exp(log_step_par)[:, None] * sigma[par_idx]
               * rng.standard_normal((n_blocks, block_dim))).ravel()
        )
        new_lik = checked(structure.par_loglik(prop))
        with np.errstate(invalid="ignore"):
            delta = (new_lik + checked(structure.par_extra(prop))) - (
                lik + checked(structure.par_extra(xi))
            )
            alphas = np.where(np.isnan(delta), 0.0, np.exp(np.minimum(delta, 0.0)))
        accept = rng.random(n_blocks) < alphas
        if accept.any():
            rows = par_idx[accept].ravel()
            xi[rows] = prop[rows]
            lik = np.where(accept, new_lik, lik)

        # Joint block: group terms plus its own priors, no likelihood.
        alpha_joint = 0.0
        joint_accepted = False
        if n_joint:
            prop = xi.copy()
            prop[joint_idx] = (
                xi[joint_idx]
                + math.exp(log_step_joint) * sigma[joint_idx] * rng.standard_normal(n_joint)
            )
            cur_local = float(structure.par_extra(xi).sum()) + structure.joint_only(xi)
            new_local = float(structure.par_extra(prop).sum()) + structure.joint_only(prop)
            gap = new_local - cur_local
            if not math.isnan(gap):
                alpha_joint = 1.0 if gap >= 0 else math.exp(gap)
            joint_accepted = rng.random() < alpha_joint
            if joint_accepted:
                xi = prop

        if adapting:
            if i in restarts:
                mean = np.zeros(dim)
                m2 = np.zeros(dim)
                count = 0
            gain = min(0.25, (i + 1) ** -0.6)
            log_step_par += gain * (alphas - target)
            log_step_joint += gain * (alpha_joint - target)
            count += 1
            delta_w = xi - mean
            mean += delta_w / count
            m2 += delta_w * (xi - mean)
            if count >= 200 and count % 100 == 0:
                est = np.sqrt(m2 / (count - 1))
                floor = 1e-6 * max(float(est.max()), 1.0)
                sigma = np.maximum(est, floor)
        else:
            accepted_updates += int(accept.sum()) + int(joint_accepted)
            post_i = i - config.burn_in
            if (post_i + 1) % config.thin == 0:
                retained[kept] = xi
                kept += 1
    rate = accepted_updates / max(config.iterations * (n_blocks + (1 if n_joint else 0)), 1)
    return retained, rate


def r_hat(store: SampleStore) -> np.ndarray:
    """Split-chain potential scale reduction factor, one value per coordinate.

    Each chain is split in half before the between/within comparison.  Chains
    with zero within-chain variance but distinct levels yield a large finite
    value in place of infinity.
    """
    length = store.retained_per_chain
    if length < 8:
        raise DiagnosticError("split r-hat needs at least 8 retained draws per chain")
    half = length // 2
    halves = []
    for chain in store.chains:
        halves.append(chain[:half])
        halves.append(chain[half:2 * half])
    draws = np.stack(halves)  # (m, n, dim)
    m, n, dim = draws.shape

    chain_means = draws.mean(axis=1)
    within = draws.var(axis=1, ddof=1).mean(axis=0)
    between = n * chain_means.var(axis=0, ddof=1)
    out = np.empty(dim)
    for j in range(dim):
        if within[j] <= 0.0:
            if between[j] <= 0.0:
                out[j] = 1.0
            else:
                warnings.warn(
                    f"coordinate {store.space.names[j]!r}: zero within-chain variance, "
                    "r-hat diverges",
                    stacklevel=2,
                )
                out[j] = _RHAT_DIVERGED
            continue
        var_plus = (n - 1) / n * within[j] + between[j] / n
        out[j] = math.sqrt(var_plus / within[j])
    # Values below 1 are estimation noise; the statistic is >= 1 by construction.
    return np.maximum(out, 1.0)


def split_halves(store: SampleStore) -> tuple[SampleStore, SampleStore]:
    """First half of each chain for proposal fitting, second half for iterating.

    Odd retained lengths drop the final draw of the chain (with a warning) so
    the two halves are disjoint and equal-sized.
    """
    length = store.retained_per_chain
    if length < 2:
        raise SamplingError("need at least two retained draws per chain to split")
    if length % 2 == 1:
        warnings.warn(
            f"odd retained length {length}: dropping the last draw of each chain",
            stacklevel=2,
        )
    half = length // 2
    fit = [chain[:half] for chain in store.chains]
    iterate = [chain[half:2 * half] for chain in store.chains]
    return (
        SampleStore(chains=fit, space=store.space, config=store.config),
        SampleStore(chains=iterate, space=store.space, config=store.config),
    )
