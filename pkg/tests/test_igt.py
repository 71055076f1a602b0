"""Payoff scheme, simulation, and data-file tests."""

import numpy as np
import pytest
from scipy import stats

from marginalis.exceptions import DataError
from marginalis.igt import (
    GroupLevel,
    PayoffScheme,
    SimConfig,
    default_scheme,
    draw_payoff,
    load_igt_csv,
    sample_next_choice,
    save_igt_csv,
    simulate,
)
from marginalis.models import EVParams, IGTRecord, ev_trial_probabilities


class TestScheme:
    def test_reference_payoff_table(self):
        scheme = default_scheme()
        assert scheme.rewards == (100.0, 100.0, 50.0, 50.0)
        assert scheme.losses_per_block == (5, 1, 5, 1)
        assert scheme.loss_totals == (-1250.0, -1250.0, -250.0, -250.0)

    def test_net_outcomes(self):
        scheme = default_scheme()
        assert scheme.net_outcome_per_block(1) == -250.0
        assert scheme.net_outcome_per_block(2) == -250.0
        assert scheme.net_outcome_per_block(3) == 250.0
        assert scheme.net_outcome_per_block(4) == 250.0

    def test_validation(self):
        with pytest.raises(DataError):
            PayoffScheme((1.0,) * 4, (11, 1, 1, 1), (-1.0,) * 4)


class TestDrawPayoff:
    def test_deck_a_block_composition(self):
        scheme = default_scheme()
        losses = [draw_payoff(scheme, 1, i, seed=7)[1] for i in range(10)]
        assert losses.count(-250.0) == 5
        assert losses.count(0.0) == 5
        rewards = [draw_payoff(scheme, 1, i, seed=7)[0] for i in range(10)]
        assert all(r == 100.0 for r in rewards)

    def test_deck_d_single_loss(self):
        scheme = default_scheme()
        losses = [draw_payoff(scheme, 4, i, seed=3)[1] for i in range(10)]
        assert losses.count(-250.0) == 1

    def test_deck_b_reward_constant(self):
        scheme = default_scheme()
        assert all(draw_payoff(scheme, 2, i, seed=5)[0] == 100.0 for i in range(30))

    def test_block_conservation_everywhere(self):
        scheme = default_scheme()
        for seed in (0, 1, 99):
            for deck in (1, 2, 3, 4):
                for block in range(3):
                    net = sum(
                        sum(draw_payoff(scheme, deck, 10 * block + i, seed))
                        for i in range(10)
                    )
                    assert net == pytest.approx(scheme.net_outcome_per_block(deck))

    def test_determinism(self):
        scheme = default_scheme()
        a = [draw_payoff(scheme, 1, i, seed=11) for i in range(20)]
        b = [draw_payoff(scheme, 1, i, seed=11) for i in range(20)]
        assert a == b

    def test_deck_validation(self):
        with pytest.raises(DataError):
            draw_payoff(default_scheme(), 5, 0, seed=0)


class TestSimulate:
    def test_zero_updating_rate_uniform_choices(self):
        config = SimConfig(
            subjects=1, trials=10_000, seed=6, params=EVParams(0.5, 0.0, 0.9)
        )
        record = simulate(config)[0]
        for deck in (1, 2, 3, 4):
            assert np.mean(record.choices == deck) == pytest.approx(0.25, abs=0.02)

    def test_reward_seeking_direction(self):
        # Low attention to losses pulls choices toward the high-reward deck
        # whose per-trial utility stays positive even on loss draws.
        config = SimConfig(
            subjects=200, trials=100, seed=5, params=EVParams(w=0.2, a=0.3, c=0.75)
        )
        records = simulate(config)
        choices = np.concatenate([r.choices for r in records])
        assert np.mean(choices == 1) > 0.25

    def test_seed_determinism(self):
        config = SimConfig(subjects=3, trials=50, seed=21)
        first = simulate(config)
        second = simulate(config)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.choices, b.choices)
            np.testing.assert_array_equal(a.rewards, b.rewards)
            np.testing.assert_array_equal(a.losses, b.losses)

    def test_choice_sampling_matches_model_probabilities(self):
        # Chi-square over replays of the next choice after a fixed history.
        params = EVParams(w=0.4, a=0.6, c=0.7)
        history = IGTRecord(
            subject="h",
            choices=[1, 2, 1],
            rewards=[100.0, 100.0, 100.0],
            losses=[0.0, -1250.0, -250.0],
        )
        probs = ev_trial_probabilities(params, history)
        rng = np.random.default_rng(33)
        counts = np.zeros(4)
        n = 10_000
        for _ in range(n):
            counts[sample_next_choice(params, history, rng) - 1] += 1
        result = stats.chisquare(counts, probs * n)
        assert result.pvalue > 0.001

    def test_group_level_generator(self):
        config = SimConfig(
            subjects=4, trials=10, seed=9,
            params=GroupLevel(mu=(0.0, 0.0, 0.0), sigma=(0.5, 0.5, 0.5)),
        )
        records = simulate(config)
        assert len(records) == 4
        assert all(r.n_trials == 10 for r in records)

    def test_per_subject_params_length_checked(self):
        with pytest.raises(DataError):
            SimConfig(subjects=2, trials=5, seed=1, params=[EVParams(0.5, 0.5, 0.5)])


class TestCsvRoundTrip:
    def test_round_trip_bit_exact(self, tmp_path):
        records = simulate(SimConfig(subjects=3, trials=20, seed=2))
        path = tmp_path / "igt.csv"
        save_igt_csv(records, path)
        loaded = load_igt_csv(path)
        assert [r.subject for r in loaded] == [r.subject for r in records]
        for a, b in zip(records, loaded):
            np.testing.assert_array_equal(a.choices, b.choices)
            np.testing.assert_array_equal(a.rewards, b.rewards)
            np.testing.assert_array_equal(a.losses, b.losses)

    def test_bad_deck_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "subject,trial,deck,reward,loss\ns1,1,1,100,0\ns1,2,5,100,0\n"
        )
        with pytest.raises(DataError, match=":3"):
            load_igt_csv(path)

    def test_incomplete_subject_named(self, tmp_path):
        records = simulate(SimConfig(subjects=2, trials=5, seed=3))
        path = tmp_path / "short.csv"
        save_igt_csv(records, path)
        lines = path.read_text().strip().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")  # drop subject 2's last trial
        with pytest.raises(DataError, match="incomplete subject 's002'"):
            load_igt_csv(path)

    def test_header_required(self, tmp_path):
        path = tmp_path / "nohdr.csv"
        path.write_text("s1,1,1,100,0\n")
        with pytest.raises(DataError, match="header"):
            load_igt_csv(path)

    def test_contiguous_trials_required(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text(
            "subject,trial,deck,reward,loss\ns1,1,1,100,0\ns1,3,2,100,0\n"
        )
        with pytest.raises(DataError, match="contiguous"):
            load_igt_csv(path)

    def test_sign_validation(self, tmp_path):
        path = tmp_path / "signs.csv"
        path.write_text("subject,trial,deck,reward,loss\ns1,1,1,-5,0\n")
        with pytest.raises(DataError, match="reward"):
            load_igt_csv(path)
