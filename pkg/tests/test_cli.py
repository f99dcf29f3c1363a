"""End-to-end CLI flows: simulate, fit, summarize, compare, diagnose."""

import json

import numpy as np
import pytest
import yaml

from arealbeta.cli import (
    EXIT_CONFIG,
    EXIT_DIAGNOSTICS,
    EXIT_INGEST,
    main,
)


def write_config(path, mapping):
    path.write_text(yaml.safe_dump(mapping))
    return str(path)


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    """A simulated dataset written by the simulate command."""
    out = tmp_path_factory.mktemp("sim")
    cfg = write_config(
        out / "sim.yaml",
        {
            "paths": {"output": str(out)},
            "simulate": {
                "graph": {"lattice": [3, 3]},
                "n_times": 5,
                "seed": 2,
                "params": {"beta0": -1.0, "gamma": 0.6, "beta": [0.8, 0.0], "phi": 40.0},
            },
        },
    )
    assert main(["simulate", "--config", cfg]) == 0
    return out


def fit_config(sim_dir, out_dir, **extra):
    mapping = {
        "paths": {
            "panel": str(sim_dir / "panel.csv"),
            "adjacency": str(sim_dir / "adjacency.csv"),
            "regions": str(sim_dir / "regions.txt"),
            "output": str(out_dir),
        },
        "model": {
            "variant": "M1",
            "sampler": {
                "iterations": 600,
                "burn_in": 300,
                "thinning": 3,
                "chains": 2,
                "seed": 11,
            },
        },
        # short chains will not pass a 1.1 rhat bar; keep the alarm out of
        # the happy-path tests and exercise it separately
        "diagnostics": {"rhat_alarm": 100.0},
    }
    for key, value in extra.items():
        mapping.setdefault(key, {}).update(value)
    return mapping


@pytest.fixture(scope="module")
def fitted(sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    cfg = write_config(out / "fit.yaml", fit_config(sim_dir, out))
    assert main(["fit", "--config", cfg]) == 0
    return out, cfg


class TestSimulate:
    def test_outputs_exist(self, sim_dir):
        for name in ("panel.csv", "truth.json", "adjacency.csv", "regions.txt"):
            assert (sim_dir / name).exists()

    def test_truth_embeds_digest(self, sim_dir):
        truth = json.loads((sim_dir / "truth.json").read_text())
        assert "run_digest" in truth and truth["seed"] == 2

    def test_bad_graph_spec_is_config_error(self, tmp_path):
        cfg = write_config(tmp_path / "bad.yaml", {"simulate": {"graph": {}}})
        assert main(["simulate", "--config", cfg]) == EXIT_CONFIG


class TestFit:
    def test_artifacts(self, fitted):
        out, _ = fitted
        assert (out / "draws.csv").exists()
        assert (out / "metadata.json").exists()
        assert (out / "diagnostics.csv").exists()
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["run_digest"] and meta["config_digest"]
        assert meta["seed"] == 11

    def test_diagnostics_table_layout(self, fitted):
        out, _ = fitted
        lines = (out / "diagnostics.csv").read_text().splitlines()
        assert lines[0].startswith("# config_digest=")
        assert lines[1] == "parameter,rhat,ess"

    def test_same_seed_byte_identical(self, sim_dir, tmp_path_factory):
        a = tmp_path_factory.mktemp("fit_a")
        b = tmp_path_factory.mktemp("fit_b")
        cfg_a = write_config(a / "c.yaml", fit_config(sim_dir, a))
        cfg_b = write_config(b / "c.yaml", fit_config(sim_dir, b))
        assert main(["fit", "--config", cfg_a]) == 0
        assert main(["fit", "--config", cfg_b]) == 0
        assert (a / "draws.csv").read_bytes() == (b / "draws.csv").read_bytes()

    def test_corrupt_panel_is_ingest_error(self, sim_dir, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("region,year,gender,rate\nr,2000,female,1.5\n")
        mapping = fit_config(sim_dir, tmp_path)
        mapping["paths"]["panel"] = str(bad)
        cfg = write_config(tmp_path / "c.yaml", mapping)
        assert main(["fit", "--config", cfg]) == EXIT_INGEST
        assert not (tmp_path / "draws.csv").exists()

    def test_invalid_variant_is_config_error(self, sim_dir, tmp_path):
        mapping = fit_config(sim_dir, tmp_path)
        mapping["model"]["variant"] = "M9"
        cfg = write_config(tmp_path / "c.yaml", mapping)
        assert main(["fit", "--config", cfg]) == EXIT_CONFIG

    def test_rhat_alarm_still_writes_draws(self, sim_dir, tmp_path):
        mapping = fit_config(sim_dir, tmp_path)
        mapping["diagnostics"]["rhat_alarm"] = 1.0000001
        cfg = write_config(tmp_path / "c.yaml", mapping)
        assert main(["fit", "--config", cfg]) == EXIT_DIAGNOSTICS
        assert (tmp_path / "draws.csv").exists()

    def test_flag_overrides_seed(self, sim_dir, tmp_path, fitted):
        mapping = fit_config(sim_dir, tmp_path)
        cfg = write_config(tmp_path / "c.yaml", mapping)
        assert main(["fit", "--config", cfg, "--seed", "99"]) == 0
        ours = (tmp_path / "draws.csv").read_bytes()
        theirs = (fitted[0] / "draws.csv").read_bytes()
        assert ours != theirs


class TestSummarize:
    def test_writes_report(self, fitted, tmp_path):
        out, _ = fitted
        code = main(["summarize", str(out / "draws.csv"), "--output", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "gender_intercepts.csv").exists()
        assert (tmp_path / "inclusion_probabilities.csv").exists()

    def test_digest_mismatch_rejected(self, fitted, sim_dir, tmp_path):
        out, _ = fitted
        mapping = fit_config(sim_dir, tmp_path)
        mapping["model"]["sampler"]["seed"] = 999  # different model config digest
        cfg = write_config(tmp_path / "other.yaml", mapping)
        code = main(
            ["summarize", str(out / "draws.csv"), "--config", cfg, "--output", str(tmp_path)]
        )
        assert code == EXIT_CONFIG

    def test_matching_config_accepted(self, fitted, tmp_path):
        out, cfg = fitted
        code = main(
            ["summarize", str(out / "draws.csv"), "--config", cfg, "--output", str(tmp_path)]
        )
        assert code == 0

    def test_missing_draws_rejected(self, tmp_path):
        assert main(["summarize", str(tmp_path / "nope.csv")]) == EXIT_CONFIG

    def test_empty_draws_rejected(self, tmp_path):
        draws = tmp_path / "draws.csv"
        draws.write_text("chain,iteration,beta0\n")
        (tmp_path / "metadata.json").write_text("{}")
        assert main(["summarize", str(draws)]) == EXIT_CONFIG


class TestDiagnose:
    def test_recomputes_table(self, fitted, sim_dir, tmp_path):
        out, _ = fitted
        cfg = write_config(tmp_path / "d.yaml", fit_config(sim_dir, tmp_path))
        code = main(
            ["diagnose", str(out / "draws.csv"), "--config", cfg, "--output", str(tmp_path)]
        )
        assert code == 0
        assert (tmp_path / "diagnostics.csv").exists()

    def test_alarm_exit_code(self, fitted, sim_dir, tmp_path):
        out, _ = fitted
        mapping = fit_config(sim_dir, tmp_path)
        mapping["diagnostics"]["rhat_alarm"] = 1.0000001
        cfg = write_config(tmp_path / "d.yaml", mapping)
        code = main(
            ["diagnose", str(out / "draws.csv"), "--config", cfg, "--output", str(tmp_path)]
        )
        assert code == EXIT_DIAGNOSTICS


class TestCompare:
    def test_single_variant_metrics_csv(self, sim_dir, tmp_path):
        mapping = fit_config(sim_dir, tmp_path)
        mapping["compare"] = {"variants": ["M1"], "test_time": 4}
        cfg = write_config(tmp_path / "c.yaml", mapping)
        assert main(["compare", "--config", cfg]) == 0
        lines = (tmp_path / "metrics.csv").read_text().splitlines()
        assert lines[1] == "Model,RMSE,RMSE (F),RMSE (M),MAE,MBPV,SLPD"
        assert len(lines) == 3
        assert lines[2].startswith("M1,")
