"""Command-line interface tests: subcommands, exit codes, determinism."""

import json
import math

import numpy as np
import pytest

from marginalis.cli import main
from marginalis.igt import load_igt_csv, save_igt_csv, simulate, SimConfig
from marginalis.paramspace import norm_cdf
from marginalis.sampler import SampleStore
from marginalis.models import beta_binomial_model, BetaBinomialData


def run_cli(capsys, *args):
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def load_report(out: str) -> dict:
    return json.loads(out)


class TestSimulate:
    def test_row_count_and_determinism(self, tmp_path, capsys):
        out_a = tmp_path / "a.csv"
        out_b = tmp_path / "b.csv"
        for out in (out_a, out_b):
            code, stdout, _ = run_cli(
                capsys, "simulate", "--subjects", "30", "--trials", "100",
                "--seed", "7", "--out", str(out),
            )
            assert code == 0
            assert load_report(stdout)["rows"] == 3000
        assert out_a.read_bytes() == out_b.read_bytes()
        assert len(out_a.read_text().strip().splitlines()) == 3001  # header + rows

    def test_zero_trials_usage_error(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "simulate", "--trials", "0", "--seed", "1",
            "--out", str(tmp_path / "x.csv"),
        )
        assert code == 2
        assert "positive" in err

    def test_missing_seed_usage_error(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("MARGINALIS_SEED", raising=False)
        code, _, err = run_cli(
            capsys, "simulate", "--out", str(tmp_path / "x.csv")
        )
        assert code == 2
        assert "seed" in err

    def test_env_seed_fallback(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("MARGINALIS_SEED", "123")
        code, stdout, _ = run_cli(
            capsys, "simulate", "--subjects", "2", "--trials", "3",
            "--out", str(tmp_path / "x.csv"),
        )
        assert code == 0
        assert load_report(stdout)["seed"] == 123


class TestFit:
    def test_bb_fit_writes_samples(self, tmp_path, capsys):
        out = tmp_path / "samples.csv"
        code, stdout, _ = run_cli(
            capsys, "fit", "--model", "bb", "--k", "2", "--n", "10",
            "--chains", "2", "--iterations", "4000", "--burn-in", "1000",
            "--seed", "3", "--out", str(out),
        )
        assert code == 0
        report = load_report(stdout)
        assert report["r_hat"]["max"] < 1.05
        model = beta_binomial_model(BetaBinomialData(2, 10))
        store = SampleStore.load_csv(out, model.space)
        assert norm_cdf(store.pooled()).mean() == pytest.approx(0.25, abs=0.01)

    def test_fit_determinism(self, tmp_path, capsys):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for path in paths:
            code, _, _ = run_cli(
                capsys, "fit", "--model", "bb", "--k", "2", "--n", "10",
                "--chains", "2", "--iterations", "2000", "--burn-in", "500",
                "--seed", "3", "--out", str(path),
            )
            assert code == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_single_chain_accepted_with_warning(self, tmp_path, capsys):
        with pytest.warns(UserWarning, match="single chain"):
            code, _, _ = run_cli(
                capsys, "fit", "--model", "bb", "--k", "2", "--n", "10",
                "--chains", "1", "--iterations", "2000", "--burn-in", "500",
                "--seed", "3", "--out", str(tmp_path / "c.csv"),
            )
        assert code == 0

    def test_missing_data_file(self, capsys):
        code, _, err = run_cli(
            capsys, "fit", "--model", "ev-individual", "--data", "/no/such/file.csv",
            "--seed", "1",
        )
        assert code == 3


class TestMl:
    def test_bb_bridge_close_to_analytic(self, capsys):
        code, stdout, _ = run_cli(
            capsys, "ml", "--model", "bb", "--k", "2", "--n", "10",
            "--estimator", "bridge", "--seed", "1", "--n1", "20000", "--n2", "20000",
        )
        assert code == 0
        report = load_report(stdout)
        assert report["log_ml"] == pytest.approx(-math.log(11), abs=0.01)
        assert report["converged"] is True

    def test_fixture_values(self, capsys):
        code, stdout, _ = run_cli(capsys, "ml", "--fixture", "running-example")
        assert code == 0
        report = load_report(stdout)
        assert report["naive_mc"] == pytest.approx(0.0945, abs=1e-4)
        assert report["importance_sampling"] == pytest.approx(0.0827, abs=1e-4)
        assert report["generalized_harmonic_mean"] == pytest.approx(0.092, abs=1e-3)
        assert report["bridge"] == pytest.approx(0.0902, abs=1e-4)

    def test_unknown_estimator_usage_error(self, capsys):
        code, _, _ = run_cli(
            capsys, "ml", "--model", "bb", "--k", "2", "--n", "10",
            "--estimator", "bogus", "--seed", "1",
        )
        assert code == 2

    def test_report_determinism(self, tmp_path, capsys):
        reports = []
        for _ in range(2):
            code, stdout, _ = run_cli(
                capsys, "ml", "--model", "bb", "--k", "2", "--n", "10",
                "--estimator", "is", "--seed", "5", "--n1", "10000",
            )
            assert code == 0
            report = load_report(stdout)
            report.pop("wall_time_s")
            reports.append(report)
        assert reports[0] == reports[1]

    def test_out_file_atomic_json(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        code, stdout, _ = run_cli(
            capsys, "ml", "--model", "bb", "--k", "2", "--n", "10",
            "--estimator", "naive", "--seed", "2", "--n1", "5000",
            "--out", str(out),
        )
        assert code == 0
        assert json.loads(out.read_text()) == load_report(stdout)

    def test_config_file_defaults_and_flag_override(self, tmp_path, capsys):
        config = tmp_path / "run.cfg"
        config.write_text("k = 2\nn = 10\nseed = 9\nn1 = 5000\n")
        code, stdout, _ = run_cli(
            capsys, "ml", "--model", "bb", "--estimator", "naive",
            "--config", str(config),
        )
        assert code == 0
        assert load_report(stdout)["seed"] == 9
        # flag wins over the file
        code, stdout, _ = run_cli(
            capsys, "ml", "--model", "bb", "--estimator", "naive",
            "--config", str(config), "--seed", "11",
        )
        assert load_report(stdout)["seed"] == 11


class TestCompare:
    def test_identical_logml_entries(self, capsys):
        code, stdout, _ = run_cli(
            capsys, "compare", "--logml", "a=-10.0", "--logml", "b=-10.0",
        )
        assert code == 0
        rows = load_report(stdout)["models"]
        assert rows[1]["bf_vs_reference"] == 1.0
        assert rows[0]["posterior_prob"] == pytest.approx(0.5)

    def test_three_restrictions_produce_three_rows(self, tmp_path, capsys):
        data = tmp_path / "igt.csv"
        save_igt_csv(simulate(SimConfig(subjects=4, trials=40, seed=12)), data)
        code, stdout, _ = run_cli(
            capsys, "compare", "--model", "ev-hierarchical", "--data", str(data),
            "--restrict", "mu_w=auto", "--restrict", "mu_a=auto", "--restrict", "mu_c=auto",
            "--chains", "2", "--iterations", "8000", "--burn-in", "3000", "--thin", "1",
            "--n2", "4000", "--seed", "3",
        )
        assert code == 0
        report = load_report(stdout)
        rows = report["models"]
        assert len(rows) == 4  # full + three restrictions
        assert {row["model"] for row in rows[1:]} == {
            "restricted-mu_w", "restricted-mu_a", "restricted-mu_c"
        }
        for row in rows[1:]:
            assert "bf_full_vs_restricted" in row
            assert "savage_dickey_bf" in row

    def test_restrict_name_validated(self, tmp_path, capsys):
        data = tmp_path / "igt.csv"
        save_igt_csv(simulate(SimConfig(subjects=2, trials=5, seed=1)), data)
        code, _, err = run_cli(
            capsys, "compare", "--model", "ev-hierarchical", "--data", str(data),
            "--restrict", "sigma_w=0.5", "--seed", "1",
        )
        assert code == 2


class TestFixturesCommand:
    def test_prints_reference_values(self, capsys):
        code, stdout, _ = run_cli(capsys, "fixtures")
        assert code == 0
        report = load_report(stdout)
        assert report["bridge_iterations"] <= 6
        assert report["analytic"] == pytest.approx(1 / 11, rel=1e-12)
