"""
Tests for the myopic oracle and regret accounting.
"""

import numpy as np
import pytest

from src.market.environments import CoordinateMeanValuation, UniformBoxDensity, make_finite_env, make_simhash_env
from src.market.oracle import conditional_value, conditional_value_table, oracle_decision, regret
from src.market.pricing import PointPrice, UniformPrice, stochastic_price_process
from src.market.protocol import run_protocol
from src.market.types import RoundRecord, Transcript
from src.strategies.baselines import AlwaysBuy, NeverBuy, OracleStrategy
from src.utils.errors import InvalidArgumentError, NoMassError


@pytest.fixture
def pooled_env():
    """Two items sharing mask value 1, conditional value 0.5."""
    return make_finite_env(
        items=["a", "b"],
        values=[0.2, 0.8],
        probs=[0.5, 0.5],
        mask_map=[1, 1],
        price_process=stochastic_price_process({1: UniformPrice(0.0, 1.0)}),
    )


def _one_round(value: float, price: float, decision: int) -> Transcript:
    record = RoundRecord(t=1, mask=1, price=price, decision=decision, utility=(value - price) * decision)
    return Transcript(records=[record], horizon=1, seed=0, true_items=[0], true_values=[value])


def test_symmetric_average(pooled_env):
    """Test the plain average when the mask merges both items."""
    assert conditional_value(pooled_env, 1) == pytest.approx(0.5)


def test_singleton_preimage():
    """Test that a mask value holding one item returns its value."""
    env = make_finite_env(items=["a", "b"], values=[0.2, 0.8], probs=[0.5, 0.5], mask_map=[1, 2])
    assert conditional_value(env, 1) == pytest.approx(0.2)
    assert conditional_value(env, 2) == pytest.approx(0.8)


def test_weighted_average():
    """Test (0.5*0.1 + 0.25*0.5) / 0.75."""
    env = make_finite_env(items=["a", "b", "c"], values=[0.1, 0.5, 0.9], probs=[0.5, 0.25, 0.25], mask_map=[1, 1, 2])
    assert conditional_value(env, 1) == pytest.approx(0.175 / 0.75)
    table = conditional_value_table(env)
    assert table.exact
    assert table.masses == {1: 0.75, 2: 0.25}
    assert table.eta_min == pytest.approx(0.25)


def test_zero_mass_query_raises():
    """Test that a mask value with no items has no conditional value."""
    env = make_finite_env(items=["a", "b"], values=[0.2, 0.8], probs=[0.5, 0.5], mask_map=[1, 1], n=2)
    with pytest.raises(NoMassError):
        conditional_value(env, 2)


def test_simhash_table_is_monte_carlo():
    """Test the Monte-Carlo table for a SimHash env."""
    env = make_simhash_env(
        d=2, ell=1, density=UniformBoxDensity(2), valuation=CoordinateMeanValuation(1.0), separator_seed=3
    )
    table = conditional_value_table(env, n_samples=20_000, seed=1)
    assert not table.exact
    assert table.n_samples == 20_000
    # mass-weighted region means recover the box mean 1/2
    overall = sum(table.masses[k] * table.cond_values[k] for k in table.cond_values)
    assert overall == pytest.approx(0.5, abs=0.01)
    assert all(table.masses[k] > 0.0 for k in (1, 2))
    assert sum(table.masses.values()) == pytest.approx(1.0)


def test_oracle_tables_are_cached(pooled_env):
    """Test that repeated queries reuse the table."""
    assert conditional_value_table(pooled_env) is conditional_value_table(pooled_env)


@pytest.mark.parametrize("cond, price, expected", [(0.5, 0.4, 1), (0.5, 0.5, 0), (0.0, 0.0, 0)])
def test_oracle_decision_is_strict(cond, price, expected):
    """Test the strict inequality at and around the boundary."""
    assert oracle_decision(cond, price) == expected


def test_oracle_run_has_zero_regret(pooled_env):
    """Test that a buyer matching the oracle every round accrues nothing."""
    strategy = OracleStrategy(conditional_value_table(pooled_env))
    transcript = run_protocol(pooled_env, strategy, T=300, seed=5)
    ledger = regret(transcript, pooled_env)
    assert ledger.total == 0.0
    assert np.all(ledger.contributions == 0.0)


def test_negative_contribution(pooled_env):
    """Test v*=0.2, p=0.3, oracle buys, buyer skips."""
    ledger = regret(_one_round(0.2, 0.3, 0), pooled_env)
    assert ledger.oracle_decisions[0] == 1
    assert ledger.contributions[0] == pytest.approx(-0.1)


def test_positive_contribution(pooled_env):
    """Test v*=0.9, p=0.3, oracle buys, buyer skips."""
    ledger = regret(_one_round(0.9, 0.3, 0), pooled_env)
    assert ledger.total == pytest.approx(0.6)


def test_cumulative_is_running_sum(pooled_env):
    """Test the running total on a real transcript."""
    transcript = run_protocol(pooled_env, NeverBuy(), T=200, seed=2)
    ledger = regret(transcript, pooled_env)
    np.testing.assert_allclose(ledger.cumulative, np.cumsum(ledger.contributions))
    assert ledger.cumulative.shape == (200,)


def test_expected_regret_of_always_buy_is_nonnegative(pooled_env):
    """Test that averaged over seeds always-buy does no better than the oracle."""
    totals = [regret(run_protocol(pooled_env, AlwaysBuy(), T=400, seed=s), pooled_env).total for s in range(20)]
    assert np.mean(totals) > 0.0


def test_mismatched_env_rejected(pooled_env):
    """Test that a transcript from another env cannot be scored."""
    other = make_finite_env(
        items=["a", "b"],
        values=[0.3, 0.8],
        probs=[0.5, 0.5],
        mask_map=[1, 1],
        price_process=stochastic_price_process({1: PointPrice(0.4)}),
    )
    transcript = run_protocol(other, NeverBuy(), T=10, seed=1)
    with pytest.raises(InvalidArgumentError):
        regret(transcript, pooled_env)


def test_relabeling_items_keeps_decisions():
    """Test that permuting item ids along with their data leaves every oracle decision unchanged."""
    values = np.array([0.9, 0.1, 0.6, 0.35, 0.8])
    probs = np.array([0.1, 0.3, 0.2, 0.15, 0.25])
    mask_map = np.array([1, 1, 2, 3, 3])
    original = make_finite_env(
        items=["a", "b", "c", "d", "e"], values=values.tolist(), probs=probs.tolist(), mask_map=mask_map.tolist()
    )
    order = np.random.default_rng(6).permutation(5)
    relabeled = make_finite_env(
        items=[f"item-{k}" for k in range(5)],
        values=values[order].tolist(),
        probs=probs[order].tolist(),
        mask_map=mask_map[order].tolist(),
    )
    for mask in (1, 2, 3):
        assert conditional_value(relabeled, mask) == pytest.approx(conditional_value(original, mask), abs=1e-12)
        for price in np.linspace(0.0, 1.0, 21):
            assert oracle_decision(conditional_value(relabeled, mask), price) == oracle_decision(
                conditional_value(original, mask), price
            )


def test_oracle_decision_is_nonincreasing_in_price():
    """Test that raising the price never turns a skip into a purchase."""
    prices = np.linspace(0.0, 1.0, 101)
    for cond in np.linspace(0.0, 1.0, 41):
        decisions = np.array([oracle_decision(cond, p) for p in prices])
        assert np.all(np.diff(decisions) <= 0)
