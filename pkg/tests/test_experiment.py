"""
Tests for experiment execution and its CSV outputs.
"""

import json
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.harness import experiment
from src.harness.config import parse_experiment_config
from src.harness.experiment import ROUND_COLUMNS, ExperimentRunner, reference_rates, run_cell, run_experiment
from src.strategies import bounds
from src.strategies.etc_finite import schedule_unknown_eta
from src.strategies.etc_simhash import exploration_length
from src.utils.errors import ConfigError

FINITE_ENV = {
    "family": "finite",
    "values": [0.9, 0.5, 0.8, 0.2, 0.6, 0.3, 0.7, 0.1],
    "probs": [0.15, 0.1, 0.15, 0.1, 0.1, 0.15, 0.1, 0.15],
    "mask_map": [1, 1, 2, 2, 3, 3, 4, 4],
    "n": 4,
    "prices": {"type": "stochastic", "default": {"kind": "uniform"}},
}

SIMHASH_ENV = {
    "family": "simhash",
    "d": 2,
    "ell": 1,
    "separator_seed": 3,
    "valuation": {"kind": "coordinate", "index": 0},
    "prices": {"type": "stochastic", "default": {"kind": "uniform"}},
}


def _config(strategy, env=FINITE_ENV, **overrides):
    data = {
        "name": "unit",
        "env": env,
        "strategy": strategy,
        "horizons": [40, 80, 120, 160],
        "replicates": 2,
        "oracle_samples": 20_000,
    }
    data.update(overrides)
    return parse_experiment_config(data)


@pytest.fixture
def temp_dir():
    """Create a temporary output directory."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


def test_cells_are_ordered_by_horizon_then_seed(temp_dir):
    """Test the (T, seed) grid with the seed base."""
    runner = ExperimentRunner(_config({"id": "never-buy"}, horizons=[10, 20], seed_base=5), temp_dir)
    assert runner.cells() == [(10, 5), (10, 6), (20, 5), (20, 6)]


def test_oracle_has_zero_regret_and_no_fit(temp_dir):
    """Test that the oracle run scores zero and the fit is skipped."""
    series = run_experiment(_config({"id": "oracle"}), temp_dir)
    assert np.all(series.results["final_regret"] == 0.0)
    assert not (temp_dir / "fit.txt").exists()

    manifest = json.loads((temp_dir / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "completed"
    assert manifest["fit"] is None
    assert len(manifest["errors"]) == 1


def test_outputs_and_manifest(temp_dir):
    """Test the written files and per-cell metadata."""
    run_experiment(_config({"id": "exp4vc"}), temp_dir)
    for name in ("rounds.csv", "results.csv", "summary.csv", "regret_curve.dat", "manifest.json"):
        assert (temp_dir / name).exists(), name

    rounds = pd.read_csv(temp_dir / "rounds.csv", float_precision="round_trip")
    assert list(rounds.columns) == ROUND_COLUMNS
    assert len(rounds) == 2 * (40 + 80 + 120 + 160)

    manifest = json.loads((temp_dir / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "completed"
    assert len(manifest["cells"]) == 8
    assert all("tau" in cell and "gamma" in cell for cell in manifest["cells"])
    assert set(manifest["reference_rates"]) == {"40", "80", "120", "160"}
    assert manifest["reference_rates"]["40"]["rate"] > 0.0
    assert "rounds.csv" in manifest["outputs"]
    assert (temp_dir / "fit.txt").exists() == (manifest["fit"] is not None)


def test_cumulative_regret_matches_results(temp_dir):
    """Test that the last cum_regret of each run is its final regret."""
    run_experiment(_config({"id": "random-buy"}), temp_dir)
    rounds = pd.read_csv(temp_dir / "rounds.csv", float_precision="round_trip")
    results = pd.read_csv(temp_dir / "results.csv", float_precision="round_trip")

    last = rounds.groupby("run_id", sort=False)["cum_regret"].last()
    for row in results.itertuples(index=False):
        assert last[row.run_id] == row.final_regret
    np.testing.assert_allclose(
        rounds.groupby("run_id")["regret_contribution"].sum()[results["run_id"]].to_numpy(),
        results["final_regret"].to_numpy(),
        atol=1e-9,
    )


def test_summary_recomputes_from_results(temp_dir):
    """Test that summary.csv is the per-horizon mean of results.csv."""
    run_experiment(_config({"id": "random-buy"}), temp_dir)
    results = pd.read_csv(temp_dir / "results.csv", float_precision="round_trip")
    summary = pd.read_csv(temp_dir / "summary.csv", float_precision="round_trip")
    means = results.groupby("T")["final_regret"].mean()
    np.testing.assert_allclose(summary["mean_regret"].to_numpy(), means.to_numpy(), rtol=1e-12)
    assert summary["replicates"].tolist() == [2, 2, 2, 2]


def test_same_config_same_bytes(temp_dir):
    """Test byte-identical outputs across reruns and worker counts."""
    config = _config({"id": "exp4vc"})
    run_experiment(config, temp_dir / "a")
    run_experiment(config, temp_dir / "b")
    run_experiment(config, temp_dir / "c", parallelism=2)
    for name in ("rounds.csv", "results.csv", "summary.csv", "regret_curve.dat", "fit.txt"):
        if not (temp_dir / "a" / name).exists():
            assert not (temp_dir / "b" / name).exists()
            continue
        reference = (temp_dir / "a" / name).read_bytes()
        assert (temp_dir / "b" / name).read_bytes() == reference, name
        assert (temp_dir / "c" / name).read_bytes() == reference, name


def test_seed_base_shifts_runs(temp_dir):
    """Test that a different seed base changes the run ids and the results."""
    config = _config({"id": "random-buy"})
    first = run_experiment(config, temp_dir / "a")
    second = run_experiment(config, temp_dir / "b", seed_base=100)
    assert second.results["seed"].min() == 100
    assert not np.array_equal(first.results["final_regret"], second.results["final_regret"])


def test_capped_exploration_is_recorded(temp_dir):
    """Test that a capped ETC schedule lands in the cell metadata."""
    config = _config(
        {"id": "etc-finite", "params": {"c": 1.0}},
        env={**FINITE_ENV, "prices": {"type": "adversarial", "generator": "periodic-spike", "seed": 7}},
    )
    cell = run_cell(config.model_dump(), 40, 0)
    assert cell.metadata["capped"] is True
    assert cell.metadata["t_prime"] == 20
    assert cell.run_id == "T40-s0"


def test_simhash_cell_metadata():
    """Test an ETC-SimHash cell."""
    config = _config(
        {"id": "etc-simhash", "params": {"n_samples": 2000, "n_bootstrap": 10}}, env=SIMHASH_ENV, write_rounds=False
    )
    cell = run_cell(config.model_dump(), 120, 1)
    assert cell.rounds is None
    assert cell.metadata["t_prime"] == exploration_length(120, 2, 1, 0.05)
    assert 1 <= cell.metadata["estimations"] <= 2


def test_doubling_cell_records_epochs():
    """Test that doubling cells report their epoch lengths."""
    config = _config(
        {"id": "etc-simhash-doubling", "params": {"T0": 10, "n_samples": 2000, "n_bootstrap": 10}}, env=SIMHASH_ENV
    )
    cell = run_cell(config.model_dump(), 100, 0)
    assert cell.metadata["epochs"] == [20, 40, 40]
    assert len(cell.rounds) == 100


def test_reference_rates_only_for_learners():
    """Test that baselines have no reference curve."""
    assert reference_rates(_config({"id": "always-buy"})) == {}
    rates = reference_rates(_config({"id": "etc-finite", "params": {"schedule": "known-eta"}}))
    assert list(rates) == ["40", "80", "120", "160"]


def test_known_eta_rates_read_the_oracle_table(mocker):
    """Test that eta_min comes from the env's oracle table, built once, unless one is passed in."""
    config = _config({"id": "etc-finite", "params": {"schedule": "known-eta"}})
    build = mocker.spy(experiment, "conditional_value_table")
    rates = reference_rates(config)
    assert build.call_count == 1
    # four masks of mass 1/4 each
    for T in (40, 80, 120, 160):
        assert rates[str(T)]["rate"] == pytest.approx(bounds.etc_regret_bound_known(T, 4, 0.25))

    table = mocker.Mock(eta_min=0.5)
    rates = reference_rates(config, table)
    assert build.call_count == 1
    assert rates["40"]["rate"] == pytest.approx(bounds.etc_regret_bound_known(40, 4, 0.5))


def test_etc_reference_terms():
    """Test the exploitation terms written next to the finite ETC rate."""
    rates = reference_rates(_config({"id": "etc-finite"}))
    entry = rates["160"]
    t_prime = schedule_unknown_eta(160, 4, 0.05)
    assert entry["t_prime"] == t_prime
    assert entry["min_beta"] == pytest.approx(bounds.etc_min_beta(4, t_prime, 1 / 160))
    assert entry["exploit_round_regret"] == pytest.approx(
        bounds.etc_exploit_round_regret(1.0, 4, entry["min_beta"], t_prime, 1 / 160)
    )
    assert set(reference_rates(_config({"id": "exp4vc"}))["40"]) == {"rate"}


def test_simhash_reference_terms():
    """Test the PAC and exploitation terms written for ETC-SimHash."""
    rates = reference_rates(_config({"id": "etc-simhash"}, env=SIMHASH_ENV))
    entry = rates["120"]
    t_prime = exploration_length(120, 2, 1, 0.05)
    assert entry["t_prime"] == t_prime
    assert entry["pac_disagreement"] == pytest.approx(bounds.pac_disagreement_bound(t_prime, 2, 1, 0.05))
    assert entry["exploit_round_regret"] == pytest.approx(
        bounds.simhash_exploit_round_regret(1.0, t_prime, 2, 1, 0.05)
    )
    assert entry["rate"] == pytest.approx(bounds.simhash_regret_rate(120, 2, 1, 0.05))


def test_missing_output_directory():
    """Test that a run needs somewhere to write."""
    with pytest.raises(ConfigError, match="output"):
        run_experiment(_config({"id": "never-buy"}))
