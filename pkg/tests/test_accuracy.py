"""Spectral density and relative mean-squared error tests."""

import math

import numpy as np
import pytest

from marginalis.accuracy import ErrorReport, re2_bridge, spectrum0_ar
from marginalis.estimators import bridge_from_draws
from marginalis.exceptions import DiagnosticError
from marginalis.models import BetaBinomialData, Model, bb_posterior_params, beta_binomial_model
from marginalis.paramspace import norm_quantile
from marginalis.proposal import MvnProposal, fit_mvn_moments

DATA = BetaBinomialData(2, 10)
MODEL = beta_binomial_model(DATA)


def ar1_series(n, coeff, rng):
    innovations = rng.standard_normal(n)
    out = np.empty(n)
    out[0] = innovations[0] / math.sqrt(1 - coeff**2)
    for i in range(1, n):
        out[i] = coeff * out[i - 1] + innovations[i]
    return out


class TestSpectrum0Ar:
    def test_white_noise_returns_variance(self):
        rng = np.random.default_rng(0)
        sigma2 = 2.5
        series = math.sqrt(sigma2) * rng.standard_normal(100_000)
        assert spectrum0_ar(series) == pytest.approx(sigma2, rel=0.1)

    def test_ar1_analytic_value(self):
        rng = np.random.default_rng(1)
        series = ar1_series(100_000, 0.5, rng)
        assert spectrum0_ar(series) == pytest.approx(1.0 / (1 - 0.5) ** 2, rel=0.1)

    def test_mean_shift_invariance(self):
        rng = np.random.default_rng(2)
        series = rng.standard_normal(50_000)
        assert spectrum0_ar(series + 100.0) == pytest.approx(spectrum0_ar(series), rel=1e-10)

    def test_degenerate_series(self):
        with pytest.raises(DiagnosticError):
            spectrum0_ar(np.ones(100))

    def test_too_short(self):
        with pytest.raises(DiagnosticError):
            spectrum0_ar(np.arange(5.0))


class _LogDensity:
    """Wrap a log-density callable into the proposal interface."""

    def __init__(self, func):
        self._func = func

    def log_pdf(self, xis):
        return self._func(np.atleast_2d(xis))


class TestRe2Bridge:
    def _posterior_draws(self, n, rng):
        alpha, beta = bb_posterior_params(DATA)
        return norm_quantile(rng.beta(alpha, beta, size=n))[:, None]

    def test_report_identities(self):
        rng = np.random.default_rng(3)
        draws = self._posterior_draws(5_000, rng)
        proposal = fit_mvn_moments(draws)
        estimate = bridge_from_draws(MODEL, proposal, draws, proposal.sample(5_000, rng))
        report = re2_bridge(
            MODEL, proposal, estimate.log_ml, draws, proposal.sample(5_000, rng)
        )
        assert report.re2 == report.term1 + report.term2
        assert report.cv_percent == pytest.approx(100 * math.sqrt(report.re2), rel=1e-12)
        assert report.term1 >= 0 and report.term2 >= 0

    def test_zero_error_when_proposal_is_normalized_posterior(self):
        log_ml = math.log(1 / 11)

        def normalized_posterior(xis):
            return MODEL.log_unnorm_post_many(np.atleast_2d(xis)) - log_ml

        rng = np.random.default_rng(4)
        draws = self._posterior_draws(10_000, rng)
        report = re2_bridge(
            MODEL, _LogDensity(normalized_posterior), log_ml, draws,
            self._posterior_draws(10_000, rng),
        )
        assert report.re2 <= 1e-4

    def test_iid_rho_near_one(self):
        rng = np.random.default_rng(5)
        draws = self._posterior_draws(20_000, rng)
        proposal = fit_mvn_moments(draws)
        report = re2_bridge(MODEL, proposal, math.log(1 / 11), draws, proposal.sample(20_000, rng))
        assert report.rho_f2_zero == pytest.approx(1.0, abs=0.15)

    def test_autocorrelated_draws_inflate_rho(self):
        # A sticky Markov chain on the posterior: repeat each draw 8 times.
        rng = np.random.default_rng(6)
        base = self._posterior_draws(3_000, rng)
        sticky = np.repeat(base, 8, axis=0)
        proposal = fit_mvn_moments(base)
        report = re2_bridge(
            MODEL, proposal, math.log(1 / 11), sticky, proposal.sample(10_000, rng)
        )
        assert report.rho_f2_zero > 3.0

    def test_re2_halves_when_sample_sizes_double(self):
        rng = np.random.default_rng(7)
        ratios = []
        for _ in range(20):
            small = self._posterior_draws(2_000, rng)
            big = self._posterior_draws(4_000, rng)
            proposal = fit_mvn_moments(big)
            r_small = re2_bridge(
                MODEL, proposal, math.log(1 / 11), small, proposal.sample(2_000, rng)
            )
            r_big = re2_bridge(
                MODEL, proposal, math.log(1 / 11), big, proposal.sample(4_000, rng)
            )
            ratios.append(r_small.re2 / r_big.re2)
        assert np.median(ratios) == pytest.approx(2.0, rel=0.35)

    def test_per_chain_series(self):
        rng = np.random.default_rng(8)
        chains = [self._posterior_draws(4_000, rng) for _ in range(2)]
        proposal = fit_mvn_moments(np.concatenate(chains))
        report = re2_bridge(
            MODEL, proposal, math.log(1 / 11), chains, proposal.sample(4_000, rng)
        )
        assert math.isfinite(report.re2)

    def test_error_report_is_frozen(self):
        report = ErrorReport(re2=1e-4, cv_percent=1.0, rho_f2_zero=1.0, term1=5e-5, term2=5e-5)
        with pytest.raises(Exception):
            report.re2 = 0.0
