"""Result emission: CSV contracts, reproducibility, ledgers, and the CLI."""

import json
import math

import numpy as np
import pytest

from courtlearn.cli import main
from courtlearn.config import parse_config
from courtlearn.experiment import (
    KWIK_COLUMNS,
    REGRET_COLUMNS,
    SLOPES_COLUMNS,
    fit_loglog_slope,
    kwik_report,
    run_experiment,
)
from courtlearn.sim import RunConfig, run


def small_spec(tmp_path, **overrides):
    data = {
        "truth": {"family": "constant", "mu": 0.5, "sigma": 0.5, "alpha": 1.0},
        "cost": {"kind": "uniform", "c_min": 0.5, "c_max": 1.0},
        "learner": {"kind": "empirical_mean"},
        "policies": ["no_subsidy", {"name": "etc"}],
        "sweep": [50, 100, 200],
        "replications": 8,
        "seed": 11,
        "out_dir": str(tmp_path / "out"),
    }
    data.update(overrides)
    return parse_config(data)


def kwik_spec(tmp_path, **overrides):
    data = {
        "truth": {
            "family": "linear",
            "beta": [0.15, 0.15],
            "beta0": 0.4,
            "sigma": 0.0,
            "alpha": 1.0,
        },
        "cases": {"kind": "ball", "dim": 2},
        "cost": {"kind": "point", "c": 1.0},
        "learner": {"kind": "norm_constrained"},
        "policies": [{"name": "kwik", "epsilon": 0.2, "delta": 0.1, "alpha1": 0.15}],
        "sweep": [400],
        "replications": 1,
        "seed": 3,
        "out_dir": str(tmp_path / "kwik_out"),
    }
    data.update(overrides)
    return parse_config(data)


class TestRunExperiment:
    def test_output_shape_and_headers(self, tmp_path):
        spec = small_spec(tmp_path)
        outputs = run_experiment(spec)
        regret_lines = outputs["regret"].read_text().splitlines()
        assert regret_lines[0] == REGRET_COLUMNS
        assert len(regret_lines) == 1 + 2 * 3  # two policies, three horizons
        slope_lines = outputs["slopes"].read_text().splitlines()
        assert slope_lines[0] == SLOPES_COLUMNS
        assert len(slope_lines) == 1 + 2
        assert {line.split(",")[0] for line in slope_lines[1:]} == {"no_subsidy", "etc"}

    def test_every_emitted_number_is_finite(self, tmp_path):
        outputs = run_experiment(small_spec(tmp_path))
        for line in outputs["regret"].read_text().splitlines()[1:]:
            for token in line.split(",")[1:]:
                assert math.isfinite(float(token))

    def test_bit_identical_rerun(self, tmp_path):
        first = run_experiment(small_spec(tmp_path, out_dir=str(tmp_path / "a")))
        second = run_experiment(small_spec(tmp_path, out_dir=str(tmp_path / "b")))
        assert first["regret"].read_bytes() == second["regret"].read_bytes()
        assert first["slopes"].read_bytes() == second["slopes"].read_bytes()

    def test_adding_a_policy_leaves_other_rows_unchanged(self, tmp_path):
        base = run_experiment(small_spec(tmp_path, out_dir=str(tmp_path / "base")))
        extended = run_experiment(
            small_spec(
                tmp_path,
                policies=["no_subsidy", {"name": "etc"}, {"name": "dynamic_compelling"}],
                out_dir=str(tmp_path / "ext"),
            )
        )
        base_rows = base["regret"].read_text().splitlines()[1:]
        extended_rows = extended["regret"].read_text().splitlines()[1:]
        assert set(base_rows).issubset(set(extended_rows))

    def test_ledgers_jsonl(self, tmp_path):
        spec = small_spec(tmp_path, sweep=[30], replications=2, policies=["no_subsidy"])
        outputs = run_experiment(spec, ledgers=True)
        lines = outputs["ledgers"].read_text().splitlines()
        assert len(lines) == 2
        entry = json.loads(lines[0])
        assert entry["policy"] == "no_subsidy"
        assert entry["T"] == 30
        assert len(entry["steps"]["t"]) == 30
        # the digest is recomputable from the run configuration
        config = RunConfig(
            horizon=30,
            truth=spec.truth,
            cases=spec.cases,
            costs=spec.costs,
            learner=spec.learner,
            policy=spec.policies[0].materialize(spec, 30),
            seed=spec.seed,
        )
        assert entry["config_digest"] == config.digest()
        total = 0.0
        for se, cc in zip(entry["steps"]["squared_error"], entry["steps"]["court_cost_incurred"]):
            total += se + cc
        assert total == entry["total_loss"]


class TestSlopeFit:
    def test_recovers_power_law(self):
        horizons = np.array([1000, 10_000, 100_000])
        values = 3.0 * horizons.astype(float) ** -0.5
        assert fit_loglog_slope(horizons, values) == pytest.approx(-0.5)

    def test_drops_nonpositive_points(self):
        horizons = np.array([10, 100, 1000])
        values = np.array([1.0, 0.0, 0.1])
        assert fit_loglog_slope(horizons, values) == pytest.approx(-0.5)
        assert fit_loglog_slope(horizons, np.array([0.0, 0.0, 1.0])) is None


class TestKwikReport:
    def test_columns_and_noiseless_accuracy(self, tmp_path):
        spec = kwik_spec(tmp_path)
        outputs = kwik_report(spec)
        lines = outputs["kwik"].read_text().splitlines()
        assert lines[0] == KWIK_COLUMNS
        row = dict(zip(KWIK_COLUMNS.split(","), lines[1].split(",")))
        assert int(row["T"]) == 400
        assert int(row["n"]) == 2
        predicted = int(row["predicted_count"])
        compelled = int(row["compelled_count"])
        assert predicted + compelled == 400
        assert predicted > 0
        # zero noise: once the gate opens, the fitted rule is exact
        assert float(row["fraction_predictions_within_eps"]) == 1.0

    def test_requires_exactly_one_kwik_policy(self, tmp_path):
        spec = small_spec(tmp_path)
        with pytest.raises(Exception, match="kwik"):
            kwik_report(spec)


class TestCli:
    def _write_config(self, tmp_path, out_dir):
        config = {
            "truth": {"family": "constant", "mu": 0.5, "sigma": 0.5, "alpha": 1.0},
            "cost": {"kind": "point", "c": 1.0},
            "learner": {"kind": "empirical_mean"},
            "policies": ["no_subsidy"],
            "sweep": [20, 40],
            "replications": 3,
            "seed": 1,
            "out_dir": str(out_dir),
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        return path

    def test_run_command(self, tmp_path, capsys):
        path = self._write_config(tmp_path, tmp_path / "out")
        assert main(["run", str(path)]) == 0
        assert (tmp_path / "out" / "regret.csv").exists()
        assert "regret" in capsys.readouterr().out

    def test_run_with_overrides_and_ledgers(self, tmp_path):
        path = self._write_config(tmp_path, tmp_path / "out")
        assert main(["run", str(path), "--out", str(tmp_path / "other"), "--seed", "7",
                     "--replications", "2", "--ledgers"]) == 0
        assert (tmp_path / "other" / "ledgers.jsonl").exists()
        assert not (tmp_path / "out").exists()

    def test_config_error_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"truth": {"family": "constant"}}))
        assert main(["run", str(path)]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_kwik_command(self, tmp_path):
        config = {
            "truth": {"family": "linear", "beta": [0.2], "beta0": 0.4, "sigma": 0.0, "alpha": 1.0},
            "cases": {"kind": "ball", "dim": 1},
            "cost": {"kind": "point", "c": 1.0},
            "learner": {"kind": "norm_constrained"},
            "policies": [{"name": "kwik", "epsilon": 0.2, "delta": 0.1, "alpha1": 0.2}],
            "sweep": [200],
            "seed": 2,
            "out_dir": str(tmp_path / "kw"),
        }
        path = tmp_path / "kwik.json"
        path.write_text(json.dumps(config))
        assert main(["kwik", str(path)]) == 0
        assert (tmp_path / "kw" / "kwik.csv").exists()
