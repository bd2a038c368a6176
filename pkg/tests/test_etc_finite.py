"""
Tests for explore-then-commit over finite masks.
"""

import math

import numpy as np
import pytest

from src.market.environments import make_finite_env
from src.market.oracle import conditional_value_table
from src.market.pricing import UniformPrice, stochastic_price_process
from src.market.protocol import run_protocol
from src.market.types import BuyerKnowledge
from src.strategies.etc_finite import (
    ETCFinite,
    FrequencyEstimates,
    explore_update,
    exploit_decision,
    known_eta_length,
    schedule_known_eta,
    schedule_unknown_eta,
    unknown_eta_length,
)
from src.utils.errors import InvalidArgumentError, PhaseViolationError


@pytest.fixture
def four_item_env():
    """Four items over two masks with uniform prices."""
    return make_finite_env(
        items=["a", "b", "c", "d"],
        values=[0.9, 0.5, 0.2, 0.4],
        probs=[0.25, 0.25, 0.25, 0.25],
        mask_map=[1, 1, 2, 2],
        price_process=stochastic_price_process({1: UniformPrice(0, 1), 2: UniformPrice(0, 1)}),
    )


def test_explore_update_single_mask():
    """Test two updates under mask 1 with t'=4."""
    est = FrequencyEstimates.empty(n=2, t_prime=4)
    explore_update(est, 1, 0.2)
    explore_update(est, 1, 0.6)
    assert est.eta_hat[0] == pytest.approx(0.5)
    assert est.v_hat[0] == pytest.approx(0.2)
    assert est.conditional_estimate(1) == pytest.approx(0.4)


def test_explore_update_two_masks():
    """Test updates (1, 0.0) and (2, 1.0) with t'=2."""
    est = FrequencyEstimates.empty(n=2, t_prime=2)
    explore_update(est, 1, 0.0)
    explore_update(est, 2, 1.0)
    np.testing.assert_allclose(est.eta_hat, [0.5, 0.5])
    np.testing.assert_allclose(est.v_hat, [0.0, 0.5])
    assert not est.exploring


def test_explore_update_after_exploration_rejected():
    """Test that a (t'+1)-th update is a phase violation."""
    est = FrequencyEstimates.empty(n=1, t_prime=1)
    explore_update(est, 1, 0.3)
    with pytest.raises(PhaseViolationError):
        explore_update(est, 1, 0.3)


@pytest.mark.parametrize("price, expected", [(0.3, 1), (0.4, 1), (0.41, 0)])
def test_exploit_decision_is_non_strict(price, expected):
    """Test Z_hat = 0.4 against prices around it."""
    est = FrequencyEstimates(eta_hat=np.array([0.5, 0.0]), v_hat=np.array([0.2, 0.0]), t_prime=4, updates=4)
    assert exploit_decision(est, 1, price) == expected


def test_unseen_mask_never_buys():
    """Test that eta_hat = 0 gives Z_hat = 0."""
    est = FrequencyEstimates(eta_hat=np.array([1.0, 0.0]), v_hat=np.array([0.5, 0.0]), t_prime=4, updates=4)
    assert exploit_decision(est, 2, 0.01) == 0


def test_unknown_eta_schedule_is_capped():
    """Test T=16, n=1, c=1: ceil(8 ln 64) = 34 capped to 8."""
    assert math.ceil(unknown_eta_length(16, 1, c=1.0)) == 34
    assert schedule_unknown_eta(16, 1, c=1.0) == 8


def test_unknown_eta_schedule_large_horizon():
    """Test T=10^6, n=2, c=0.02 against the closed form."""
    t_prime = schedule_unknown_eta(10**6, 2, c=0.02)
    assert t_prime == math.ceil(0.02 * (10**6) ** 0.75 * math.sqrt(2) * math.log(8 * 10**6))
    assert t_prime == pytest.approx(14209, rel=1e-3)


@pytest.mark.parametrize("c", [0.0, -1.0])
def test_nonpositive_multiplier_rejected(c):
    """Test that c must be positive."""
    with pytest.raises(InvalidArgumentError, match="c"):
        schedule_unknown_eta(100, 2, c=c)
    with pytest.raises(InvalidArgumentError, match="c"):
        ETCFinite(c=c)


def test_known_eta_schedule_is_capped():
    """Test T=1000, n=2, eta=0.5, c=1 capped to 500."""
    assert known_eta_length(1000, 2, 0.5, c=1.0) == pytest.approx(1800 * math.log(8000))
    assert schedule_known_eta(1000, 2, 0.5, c=1.0) == 500


def test_known_eta_rejects_nonpositive_eta():
    """Test the eta_min check."""
    with pytest.raises(InvalidArgumentError, match="eta_min"):
        schedule_known_eta(1000, 2, 0.0)


def test_known_eta_scales_as_two_thirds_power():
    """Test that T -> 4T multiplies the uncapped length by 4^(2/3) once the log is held fixed."""
    T, n = 10**5, 3
    ratio = known_eta_length(4 * T, n, 0.2) / known_eta_length(T, n, 0.2)
    log_ratio = math.log(16 * n * T) / math.log(4 * n * T)
    assert ratio / log_ratio == pytest.approx(4 ** (2 / 3), rel=0.02)


def test_known_eta_needs_eta_min():
    """Test that the known-eta schedule cannot run without eta_min."""
    with pytest.raises(InvalidArgumentError, match="eta_min"):
        ETCFinite(schedule="known-eta")


def test_unknown_schedule_name_rejected():
    """Test the schedule id check."""
    with pytest.raises(InvalidArgumentError, match="schedule"):
        ETCFinite(schedule="adaptive")


def test_capped_flag():
    """Test that binding with a short horizon records the cap."""
    strategy = ETCFinite(c=1.0)
    strategy.bind(BuyerKnowledge(H=1.0, horizon=16, mask_cardinality=1), np.random.default_rng(0))
    assert strategy.t_prime == 8
    assert strategy.capped


def test_exploration_buys_then_commits(four_item_env):
    """Test that the first t' rounds buy and the rest follow the frequency estimates."""
    strategy = ETCFinite(c=0.05)
    transcript = run_protocol(four_item_env, strategy, T=2000, seed=4)
    t_prime = strategy.t_prime
    assert t_prime == schedule_unknown_eta(2000, 2, c=0.05)

    decisions = transcript.decisions()
    assert np.all(decisions[:t_prime] == 1)
    assert strategy.estimates.updates == t_prime
    assert strategy.estimates.eta_hat.sum() == pytest.approx(1.0)
    for record in transcript.records[t_prime:]:
        assert record.decision == exploit_decision(strategy.estimates, record.mask, record.price)


def test_estimates_approach_conditional_values(four_item_env):
    """Test that a long exploration phase recovers the conditional values."""
    strategy = ETCFinite(c=1.0)
    run_protocol(four_item_env, strategy, T=8000, seed=2)
    table = conditional_value_table(four_item_env)
    for key in (1, 2):
        assert strategy.estimates.conditional_estimate(key) == pytest.approx(table.cond_values[key], abs=0.03)


def test_known_eta_strategy_uses_known_schedule():
    """Test that knowing eta_min switches the schedule."""
    unknown = ETCFinite(c=0.05)
    known = ETCFinite(c=0.05, schedule="known-eta", eta_min=0.5)
    knowledge = BuyerKnowledge(H=1.0, horizon=10**6, mask_cardinality=2)
    unknown.bind(knowledge, np.random.default_rng(0))
    known.bind(knowledge, np.random.default_rng(0))
    assert known.t_prime == schedule_known_eta(10**6, 2, 0.5, c=0.05)
    assert unknown.t_prime == schedule_unknown_eta(10**6, 2, c=0.05)
    assert not known.capped and not unknown.capped
