"""
End-to-end statistical checks. Slow: run with ``pytest -m slow``.
"""

import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from src.harness.config import load_experiment_config
from src.harness.experiment import run_experiment
from src.harness.fitting import fit_regret_exponent
from src.market.environments import (
    ContinuousItemModel,
    CoordinateMeanValuation,
    CoordinateValuation,
    UniformBoxDensity,
    generate_separators,
    make_finite_env,
)
from src.market.geometry import PolytopeRegion, estimate_region_mean, recover_separators, simhash_batch
from src.market.oracle import conditional_value_table, regret
from src.market.pricing import UniformPrice, stochastic_price_process
from src.market.protocol import run_protocol
from src.strategies.baselines import AlwaysBuy, FixedThreshold, NeverBuy, OracleStrategy
from src.strategies.bounds import pac_disagreement_bound
from src.strategies.etc_finite import FrequencyEstimates, explore_update
from src.strategies.exp4vc import (
    BucketAccumulators,
    Exp4VC,
    build_policy_grid,
    locate_bucket,
    mixture_probs,
    update_accumulators,
)

pytestmark = pytest.mark.slow

EXPERIMENTS_DIR = Path(__file__).resolve().parents[1] / "config" / "experiments"
WORKERS = os.cpu_count() or 1


@pytest.fixture
def temp_dir():
    """Create a temporary output directory."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


def _uniform_prices(n):
    return stochastic_price_process({i: UniformPrice(0.0, 1.0) for i in range(1, n + 1)})


def _random_finite_env(rng, n_items=6, n=3):
    values = rng.uniform(0.0, 1.0, n_items)
    probs = rng.dirichlet(np.ones(n_items))
    mask_map = np.concatenate([np.arange(1, n + 1), rng.integers(1, n + 1, n_items - n)])
    return make_finite_env(
        items=list(range(n_items)),
        values=values.tolist(),
        probs=probs.tolist(),
        mask_map=mask_map.tolist(),
        price_process=_uniform_prices(n),
        n=n,
    )


def _mean_and_stderr(samples):
    samples = np.asarray(samples, dtype=float)
    return samples.mean(), samples.std(ddof=1) / math.sqrt(samples.size)


def test_mixture_cost_is_linear():
    """Test that accumulator cells read per round grow linearly in n + tau and one cell is written."""
    rng = np.random.default_rng(0)
    sizes, reads = [], []
    for n in (2, 8, 32):
        for tau in (10, 100, 1000):
            observations = [(int(rng.integers(1, n + 1)), float(rng.random())) for _ in range(tau)]
            grid = build_policy_grid(observations, n)
            acc = BucketAccumulators(grid)
            rounds = 20
            for _ in range(rounds):
                i = int(rng.integers(1, n + 1))
                j = locate_bucket(grid, i, float(rng.random()))
                probs = mixture_probs(grid, acc, (i, j), 0.1)
                arm = int(rng.random() < probs.xi_bar[1])
                update_accumulators(acc, (i, j), arm, float(rng.random()), probs, 0.1, 0.01)
            assert acc.writes == rounds
            sizes.append(n + tau)
            reads.append(acc.reads / rounds)

    fit = stats.linregress(sizes, reads)
    assert fit.rvalue**2 >= 0.99
    assert max(r / s for r, s in zip(reads, sizes)) <= 2.0


def test_exp4vc_beats_trivial_baselines():
    """Test Exp4VC against always-buy and never-buy on a two-mask env."""
    env = make_finite_env(
        items=["a", "b", "c", "d"],
        values=[0.9, 0.7, 0.3, 0.1],
        probs=[0.25, 0.25, 0.25, 0.25],
        mask_map=[1, 1, 2, 2],
        price_process=_uniform_prices(2),
    )
    table = conditional_value_table(env)
    T = 5000
    totals = {"exp4vc": [], "always": [], "never": []}
    for seed in range(50):
        for name, strategy in (("exp4vc", Exp4VC()), ("always", AlwaysBuy()), ("never", NeverBuy())):
            totals[name].append(regret(run_protocol(env, strategy, T, seed), env, table).total)

    learned, _ = _mean_and_stderr(totals["exp4vc"])
    assert learned < np.mean(totals["always"])
    assert learned < np.mean(totals["never"])


def _threshold_regrets(env_index, threshold, T, seeds):
    env = _random_finite_env(np.random.default_rng([1, env_index]))
    table = conditional_value_table(env)
    def make():
        return OracleStrategy(table) if threshold is None else FixedThreshold(default=threshold)

    return [regret(run_protocol(env, make(), T, s), env, table).total for s in range(seeds)]


def test_oracle_is_optimal_among_thresholds():
    """Test the oracle's zero regret and the nonnegativity of every fixed threshold's regret."""
    grid = [None] + [float(v) for v in np.round(np.arange(0.0, 1.0001, 0.05), 2)]
    n_envs, T, seeds = 20, 5000, 200
    cells = [(e, threshold) for e in range(n_envs) for threshold in grid]
    with ProcessPoolExecutor(max_workers=WORKERS) as executor:
        outcomes = executor.map(
            _threshold_regrets, [e for e, _ in cells], [t for _, t in cells], [T] * len(cells), [seeds] * len(cells)
        )
        for (e, threshold), runs in zip(cells, outcomes):
            if threshold is None:
                assert np.all(np.asarray(runs) == 0.0), e
                continue
            mean, stderr = _mean_and_stderr(runs)
            assert mean >= -3.0 * stderr, (e, threshold)


def test_exploration_estimates_concentrate():
    """Test |Z - v_hat/eta_hat| against the concentration radius over 200 explorations."""
    values = np.array([0.9, 0.5, 0.8, 0.2, 0.6, 0.3, 0.7, 0.1])
    probs = np.array([0.125] * 8)
    mask_map = np.array([1, 1, 2, 2, 3, 3, 4, 4])
    n, t_prime, H = 4, 2000, 1.0
    truth = np.array([values[mask_map == i].mean() for i in range(1, n + 1)])
    radius = 25 * H * math.sqrt(math.log(4 * n * 20) / (0.2 * t_prime))

    rng = np.random.default_rng(2)
    failures = 0
    replicates = 200
    for _ in range(replicates):
        est = FrequencyEstimates.empty(n, t_prime)
        for item in rng.choice(values.size, size=t_prime, p=probs):
            explore_update(est, int(mask_map[item]), float(values[item]))
        errors = [abs(truth[i - 1] - est.conditional_estimate(i)) for i in range(1, n + 1)]
        failures += max(errors) > radius

    p = 0.05
    assert failures / replicates <= p + 3 * math.sqrt(p * (1 - p) / replicates)


def test_separator_recovery_generalizes():
    """Test exact training agreement and the fresh-sample disagreement bound."""
    d, ell, t_prime, delta = 5, 3, 2000, 0.05
    density = UniformBoxDensity(d)
    bound = pac_disagreement_bound(t_prime, d, ell, delta)
    replicates = 100
    within = 0
    for r in range(replicates):
        truth = generate_separators(d, ell, density, seed=r)
        rng = np.random.default_rng([r, 1])
        train = density.sample(rng, t_prime)
        patterns = simhash_batch(truth, train)
        recovered = recover_separators(train, patterns)
        assert np.array_equal(simhash_batch(recovered, train), patterns)

        fresh = density.sample(rng, 100_000)
        disagreement = np.mean(np.any(simhash_batch(recovered, fresh) != simhash_batch(truth, fresh), axis=1))
        within += disagreement <= bound

    p = 0.95
    assert within / replicates >= p - 3 * math.sqrt(p * (1 - p) / replicates)


@pytest.mark.parametrize(
    "valuation, region, truth",
    [
        (CoordinateMeanValuation(1.0), PolytopeRegion.whole_box(2), 0.5),
        (
            CoordinateValuation(0, 1.0),
            PolytopeRegion(normals=np.array([[1.0, 1.0]]), offsets=np.array([-1.0]), bits=np.ones(1, dtype=np.int8)),
            2.0 / 3.0,
        ),
    ],
    ids=["box", "triangle"],
)
def test_region_means_cover_closed_form_truth(valuation, region, truth):
    """Test that 99% of 500 seeded estimates lie within 4 bootstrap standard errors."""
    model = ContinuousItemModel(UniformBoxDensity(2), valuation)
    estimates = 500
    hits = 0
    for seed in range(estimates):
        est = estimate_region_mean(model, region, n_samples=4000, seed=seed, n_bootstrap=200)
        hits += abs(est.estimate - truth) <= 4.0 * est.std_error
    assert hits >= 0.99 * estimates


@pytest.mark.parametrize(
    "config_name, ceiling",
    [
        ("exp4vc_finite_stochastic", 0.65),
        ("etc_finite_threshold_sweep", 0.85),
        ("etc_finite_periodic_spike", 0.85),
        ("etc_finite_near_oracle", 0.85),
        ("etc_simhash_uniform", 0.65),
    ],
)
def test_regret_exponents(temp_dir, config_name, ceiling):
    """Test fitted regret exponents over the default horizon grid."""
    config = load_experiment_config(EXPERIMENTS_DIR / f"{config_name}.json")
    series = run_experiment(config, temp_dir, parallelism=WORKERS)
    fit = fit_regret_exponent(series)
    assert fit.slope <= ceiling
    assert fit.r_squared >= 0.9


def test_doubling_matches_known_horizon(temp_dir):
    """Test that the doubling runner's exponent is within 0.1 of the known-horizon run."""
    known = load_experiment_config(EXPERIMENTS_DIR / "etc_simhash_uniform.json")
    doubling = load_experiment_config(EXPERIMENTS_DIR / "etc_simhash_doubling.json")
    known_fit = fit_regret_exponent(run_experiment(known, temp_dir / "known", parallelism=WORKERS))
    doubling_fit = fit_regret_exponent(run_experiment(doubling, temp_dir / "doubling", parallelism=WORKERS))
    assert abs(doubling_fit.slope - known_fit.slope) <= 0.1


@pytest.mark.parametrize("path", sorted(EXPERIMENTS_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_are_deterministic(temp_dir, path):
    """Test byte-identical outputs for every shipped config on a short horizon grid."""
    config = load_experiment_config(path).model_copy(
        update={"horizons": [400, 800], "replicates": 2, "write_rounds": True}
    )
    run_experiment(config, temp_dir / "a")
    run_experiment(config, temp_dir / "b", parallelism=2)
    for name in ("rounds.csv", "results.csv", "summary.csv", "regret_curve.dat"):
        assert (temp_dir / "a" / name).read_bytes() == (temp_dir / "b" / name).read_bytes(), name
