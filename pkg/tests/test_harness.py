"""Simulation orchestration: config, seeding, failure isolation, archives, CLI."""

import json
from importlib import resources
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from logitbench import cli, harness
from logitbench.errors import ConfigError
from logitbench.harness import (
    METHOD_CATALOG,
    SimulationConfig,
    derive_seed,
    load_archive,
    render_report,
    run_method,
    run_simulation,
)
from logitbench.ingest import make_folds


def data_path(name: str) -> str:
    return str(resources.files("logitbench").joinpath(f"data/{name}"))


def fast_config(tmp_path, methods=("full", "pvalue_05", "stepwise_forward"),
                replications=2, master_seed=7):
    return SimulationConfig(
        datasets=[(data_path("synth_small.csv"), "outcome")],
        methods=list(methods),
        replications=replications,
        master_seed=master_seed,
    )


class TestCatalog:
    def test_has_twenty_five_methods(self):
        assert len(METHOD_CATALOG) == 25

    def test_expected_names_present(self):
        expected = {
            "full", "pvalue_05", "pvalue_005",
            "stepwise_forward", "stepwise_backward", "stepwise_both",
            "ridge", "elastic_net", "lasso", "mcp", "scad", "firth",
            "bma_g4", "bma_g_sqrt_n", "bma_benchmark",
            "bma_hyper_g", "bma_hyper_g_over_n", "bma_beta_prime",
            "bma_cch", "bma_robust", "bma_intrinsic",
            "bma_eb_local", "bma_eb_global", "bma_aic", "bma_bic",
        }
        assert set(METHOD_CATALOG) == expected


class TestSimulationConfig:
    def test_defaults(self):
        cfg = SimulationConfig(datasets=[("a.csv", "y")])
        assert cfg.replications == 100
        assert cfg.eval_folds == 5
        assert cfg.reference_method == "bma_bic"
        assert set(cfg.methods) == set(METHOD_CATALOG)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"replications": 0},
            {"eval_folds": 1},
            {"methods": []},
            {"methods": ["not_a_method"]},
        ],
    )
    def test_validation_errors(self, kwargs):
        with pytest.raises(ConfigError):
            SimulationConfig(datasets=[("a.csv", "y")], **kwargs)

    def test_empty_datasets(self):
        with pytest.raises(ConfigError):
            SimulationConfig(datasets=[])

    def test_from_toml(self, tmp_path):
        cfg_path = tmp_path / "sim.toml"
        cfg_path.write_text(
            'methods = ["full", "lasso"]\n'
            "replications = 3\n"
            "master_seed = 42\n"
            "[[datasets]]\n"
            'path = "d.csv"\n'
            'outcome = "y"\n'
        )
        cfg = SimulationConfig.from_toml(str(cfg_path))
        assert cfg.datasets == [("d.csv", "y")]
        assert cfg.methods == ["full", "lasso"]
        assert cfg.replications == 3
        assert cfg.master_seed == 42

    def test_from_toml_unknown_key(self, tmp_path):
        cfg_path = tmp_path / "sim.toml"
        cfg_path.write_text('bogus = 1\n[[datasets]]\npath = "d.csv"\noutcome = "y"\n')
        with pytest.raises(ConfigError):
            SimulationConfig.from_toml(str(cfg_path))

    def test_from_toml_missing_datasets(self, tmp_path):
        cfg_path = tmp_path / "sim.toml"
        cfg_path.write_text('replications = 3\n')
        with pytest.raises(ConfigError):
            SimulationConfig.from_toml(str(cfg_path))

    def test_from_toml_unreadable(self, tmp_path):
        with pytest.raises(ConfigError):
            SimulationConfig.from_toml(str(tmp_path / "missing.toml"))


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(1, "d", 0, "m") == derive_seed(1, "d", 0, "m")

    def test_disjoint_over_grid(self):
        seeds = set()
        for master in (0, 1):
            for dataset in ("a", "b"):
                for rep in range(20):
                    for method in ("full", "lasso", "bma_bic"):
                        seeds.add(derive_seed(master, dataset, rep, method))
        assert len(seeds) == 2 * 2 * 20 * 3

    def test_range(self):
        for i in range(50):
            s = derive_seed(i, "x")
            assert 0 <= s < 2**63


def make_replicate(rng, n=80, p=3):
    from scipy.special import expit

    X = rng.standard_normal((n, p))
    y = (rng.random(n) < expit(0.2 + 1.2 * X[:, 0])).astype(float)
    folds = make_folds(y, 5, 11)
    return X, y, folds


class TestRunMethod:
    def test_successful_fit_populates_output(self):
        rng = np.random.default_rng(90)
        X, y, folds = make_replicate(rng)
        out = run_method("full", X, y, folds, seed=1)
        assert not out.failed
        assert out.beta_hat.shape == (4,)
        assert out.inclusion_score.shape == (3,)
        assert len(out.test_probs) == len(y)
        assert len(out.test_outcomes) == len(y)
        assert out.cpu_seconds > 0

    def test_exception_becomes_failed_record(self, monkeypatch):
        rng = np.random.default_rng(91)
        X, y, folds = make_replicate(rng)

        def boom(*args, **kwargs):
            raise RuntimeError("synthetic fault")

        monkeypatch.setattr(harness, "_fit_method", boom)
        out = run_method("full", X, y, folds, seed=1)
        assert out.failed
        assert "RuntimeError: synthetic fault" in out.error
        assert out.beta_hat is None

    def test_backward_stepwise_fails_under_separation(self):
        # complete separation: the full-model MLE backward needs does not exist
        rng = np.random.default_rng(92)
        n = 40
        x0 = np.concatenate([rng.uniform(-2, -0.3, n // 2), rng.uniform(0.3, 2, n // 2)])
        y = np.concatenate([np.zeros(n // 2), np.ones(n // 2)])
        X = np.column_stack([x0, rng.standard_normal(n)])
        folds = make_folds(y, 5, 3)
        out = run_method("stepwise_backward", X, y, folds, seed=1)
        assert out.failed
        assert out.error

    def test_timeout_marks_failed(self):
        rng = np.random.default_rng(93)
        X, y, folds = make_replicate(rng)
        out = run_method("full", X, y, folds, seed=1, timeout=0.0)
        assert out.failed
        assert "timeout" in out.error


class TestRunSimulation:
    def test_record_cardinality_and_schema(self, tmp_path):
        cfg = fast_config(tmp_path, methods=("full", "pvalue_05"), replications=3)
        out = run_simulation(cfg, str(tmp_path / "arch"))
        records, manifest = load_archive(str(out))
        assert len(records) == 3 * 2  # replications x methods, one dataset
        keys = {
            "dataset", "replication", "method", "rmse", "mis", "auprc",
            "brier", "failed", "error", "separated", "seed", "cpu_minutes",
        }
        assert all(set(r) == keys for r in records)
        assert manifest["n_records"] == 6
        assert "synth_small" in manifest["datasets"]
        info = manifest["datasets"]["synth_small"]
        assert info["n"] == 160
        assert info["dgm_selected"]

    def test_rerun_byte_identical(self, tmp_path):
        cfg = fast_config(tmp_path, replications=2)
        a = run_simulation(cfg, str(tmp_path / "a"))
        b = run_simulation(cfg, str(tmp_path / "b"))
        assert (a / "results.jsonl").read_bytes() == (b / "results.jsonl").read_bytes()
        assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()

    def test_master_seed_changes_results(self, tmp_path):
        a = run_simulation(fast_config(tmp_path, methods=("full",), replications=2,
                                       master_seed=1), str(tmp_path / "a"))
        b = run_simulation(fast_config(tmp_path, methods=("full",), replications=2,
                                       master_seed=2), str(tmp_path / "b"))
        assert (a / "results.jsonl").read_bytes() != (b / "results.jsonl").read_bytes()

    def test_results_sorted_canonically(self, tmp_path):
        cfg = fast_config(tmp_path, methods=("pvalue_05", "full"), replications=2)
        out = run_simulation(cfg, str(tmp_path / "arch"))
        rows = [json.loads(l) for l in (out / "results.jsonl").read_text().splitlines()]
        keys = [(r["dataset"], r["replication"], r["method"]) for r in rows]
        assert keys == sorted(keys)

    def test_render_report(self, tmp_path):
        cfg = fast_config(tmp_path, methods=("full", "pvalue_05"), replications=2)
        cfg.reference_method = "full"
        arch = run_simulation(cfg, str(tmp_path / "arch"))
        written = render_report(str(arch), str(tmp_path / "rep"))
        names = {p.name for p in written}
        assert names == {"scores_all.csv", "scores_all.md"}
        text = (tmp_path / "rep" / "scores_all.csv").read_text()
        assert "full" in text and "pvalue_05" in text


class TestLoadArchive:
    def test_merges_timings(self, tmp_path):
        cfg = fast_config(tmp_path, methods=("full",), replications=1)
        out = run_simulation(cfg, str(tmp_path / "arch"))
        records, _ = load_archive(str(out))
        assert all(r["cpu_minutes"] > 0 for r in records)

    def test_missing_timings_defaults_zero(self, tmp_path):
        cfg = fast_config(tmp_path, methods=("full",), replications=1)
        out = run_simulation(cfg, str(tmp_path / "arch"))
        (out / "timings.jsonl").unlink()
        records, _ = load_archive(str(out))
        assert all(r["cpu_minutes"] == 0.0 for r in records)


class TestCli:
    def _write_config(self, tmp_path, methods='["full", "pvalue_05"]', reps=1):
        cfg = tmp_path / "sim.toml"
        cfg.write_text(
            f"methods = {methods}\n"
            f"replications = {reps}\n"
            'reference_method = "full"\n'
            "[[datasets]]\n"
            f'path = "{data_path("synth_small.csv")}"\n'
            'outcome = "outcome"\n'
        )
        return cfg

    def test_ingest(self):
        runner = CliRunner()
        res = runner.invoke(cli.main, ["ingest", data_path("synth_small.csv"),
                                       "--outcome", "outcome"])
        assert res.exit_code == 0
        assert "rows: 160" in res.output

    def test_ingest_bad_outcome_exits_3(self):
        runner = CliRunner()
        res = runner.invoke(cli.main, ["ingest", data_path("synth_small.csv"),
                                       "--outcome", "nope"])
        assert res.exit_code == 3

    def test_dgm_stdout(self):
        runner = CliRunner()
        res = runner.invoke(cli.main, ["dgm", data_path("synth_small.csv"),
                                       "--outcome", "outcome"])
        assert res.exit_code == 0
        doc = json.loads(res.output)
        assert "beta_dgm" in doc and "selected" in doc

    def test_simulate_score_report_pipeline(self, tmp_path):
        runner = CliRunner()
        cfg = self._write_config(tmp_path)
        arch = tmp_path / "arch"
        res = runner.invoke(cli.main, ["simulate", "--config", str(cfg),
                                       "--out", str(arch)])
        assert res.exit_code == 0, res.output
        assert (arch / "results.jsonl").exists()

        res = runner.invoke(cli.main, ["score", str(arch)])
        assert res.exit_code == 0, res.output
        assert "| method |" in res.output

        rep = tmp_path / "rep"
        res = runner.invoke(cli.main, ["report", str(arch), "--out", str(rep)])
        assert res.exit_code == 0, res.output
        assert (rep / "scores_all.csv").exists()

    def test_simulate_missing_config_exits_2(self, tmp_path):
        runner = CliRunner()
        res = runner.invoke(cli.main, ["simulate", "--config",
                                       str(tmp_path / "nope.toml")])
        assert res.exit_code == 2

    def test_simulate_unknown_method_exits_2(self, tmp_path):
        runner = CliRunner()
        cfg = self._write_config(tmp_path)
        res = runner.invoke(cli.main, ["simulate", "--config", str(cfg),
                                       "--methods", "not_a_method"])
        assert res.exit_code == 2

    def test_score_missing_archive_exits_2(self, tmp_path):
        runner = CliRunner()
        res = runner.invoke(cli.main, ["score", str(tmp_path / "nope")])
        assert res.exit_code == 2

    def test_report_empty_archive_exits_4(self, tmp_path):
        arch = tmp_path / "arch"
        arch.mkdir()
        (arch / "results.jsonl").write_text("")
        (arch / "manifest.json").write_text('{"config": {}}')
        runner = CliRunner()
        res = runner.invoke(cli.main, ["report", str(arch),
                                       "--out", str(tmp_path / "rep")])
        assert res.exit_code == 4
