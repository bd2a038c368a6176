"""
Brute-force equivalence and invariant checks run by ``maskbuy selftest``.
"""

import itertools
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from rich.console import Console
from rich.table import Table

from ..market.environments import ContinuousItemModel, CoordinateMeanValuation, CoordinateValuation, UniformBoxDensity
from ..market.geometry import PolytopeRegion, estimate_region_mean
from ..strategies.exp4vc import (
    BucketAccumulators,
    NaivePolicyWeights,
    build_policy_grid,
    is_shattered,
    locate_bucket,
    mixture_probs,
    naive_mixture_probs,
    naive_update,
    realized_labelings,
    update_accumulators,
)

logger = logging.getLogger(__name__)

EQUIVALENCE_TOLERANCE = 1e-9
MIN_COVERAGE = 0.99


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _grid_price(rng: np.random.Generator) -> float:
    return float(rng.integers(0, 101) / 100)


def check_mixture_equivalence(instances: int = 100, rounds: int = 50, seed: int = 0) -> CheckResult:
    """
    Bucketized mixture probabilities against explicit policy enumeration on
    random grids with n <= 3 and |V_i| <= 4.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(1, 4))
        observations = [(i, float(rng.random())) for i in range(1, n + 1) for _ in range(int(rng.integers(0, 4)))]
        grid = build_policy_grid(observations, n)
        acc = BucketAccumulators(grid)
        naive = NaivePolicyWeights(grid)
        gamma = float(rng.uniform(0.05, 0.25))
        bonus = float(rng.uniform(0.0, 0.5))

        for _ in range(rounds):
            i = int(rng.integers(1, n + 1))
            # hit thresholds exactly half of the time
            if rng.random() < 0.5:
                price = float(rng.choice(grid.thresholds[i - 1]))
            else:
                price = float(rng.random())
            j = locate_bucket(grid, i, price)
            fast = mixture_probs(grid, acc, (i, j), gamma)
            slow = naive_mixture_probs(grid, naive, (i, price), gamma)
            worst = max(worst, abs(fast.xi_bar[1] - slow.xi_bar[1]), abs(fast.xi_bar[0] - slow.xi_bar[0]))

            arm = int(rng.random() < fast.xi_bar[1])
            reward = float(rng.random())
            update_accumulators(acc, (i, j), arm, reward, fast, gamma, bonus)
            naive_update(naive, (i, price), arm, reward, fast, gamma, bonus)

    return CheckResult(
        "mixture equivalence",
        worst <= EQUIVALENCE_TOLERANCE,
        f"{instances} instances x {rounds} rounds, max |diff| = {worst:.2e}",
    )


def check_shattering(max_n: int = 4, trials: int = 50, seed: int = 0) -> CheckResult:
    """n contexts (i, 1/2) are shattered; no n+1 contexts are shattered on a 0.01 grid."""
    rng = np.random.default_rng(seed)
    fine = np.arange(101) / 100
    for n in range(1, max_n + 1):
        contexts = [(i, 0.5) for i in range(1, n + 1)]
        if not is_shattered(contexts, [0.0, 1.0], n):
            return CheckResult("shattering", False, f"{n} contexts not shattered by {{0,1}}^{n}")
        for _ in range(trials):
            extra = [(int(rng.integers(1, n + 1)), _grid_price(rng)) for _ in range(n + 1)]
            if is_shattered(extra, fine, n):
                return CheckResult("shattering", False, f"{n + 1} contexts shattered: {extra}")
    return CheckResult("shattering", True, f"n <= {max_n}, {trials} random (n+1)-context sets per n")


def check_representativeness(max_n: int = 3, max_tau: int = 5, trials: int = 40, seed: int = 0) -> CheckResult:
    """Labelings from the grid built on observed prices match a 0.01 sweep of [0, 1]^n."""
    rng = np.random.default_rng(seed)
    fine = np.arange(101) / 100
    for n, tau in itertools.product(range(1, max_n + 1), range(1, max_tau + 1)):
        for _ in range(trials):
            contexts = [(int(rng.integers(1, n + 1)), _grid_price(rng)) for _ in range(tau)]
            grid = build_policy_grid(contexts, n)
            if realized_labelings(contexts, grid.thresholds, n) != realized_labelings(contexts, fine, n):
                return CheckResult("representativeness", False, f"grid misses a labeling on {contexts}")
    return CheckResult("representativeness", True, f"n <= {max_n}, tau <= {max_tau}, {trials} trials each")


def check_region_means(estimates: int = 20, n_samples: int = 4000, n_bootstrap: int = 100, seed: int = 0) -> CheckResult:
    """
    Unit-box mean 1/2 and triangle centroid 2/3: at least 99% of the
    estimates on each region must land within 4 bootstrap standard errors.
    """
    box = ContinuousItemModel(UniformBoxDensity(2), CoordinateMeanValuation(1.0))
    triangle = ContinuousItemModel(UniformBoxDensity(2), CoordinateValuation(0, 1.0))
    # x0 + x1 >= 1
    upper = PolytopeRegion(normals=np.array([[1.0, 1.0]]), offsets=np.array([-1.0]), bits=np.ones(1, dtype=np.int8))
    cases = [("box", box, PolytopeRegion.whole_box(2), 0.5), ("triangle", triangle, upper, 2.0 / 3.0)]

    seeds = np.random.SeedSequence(seed).spawn(estimates * len(cases))
    hits = {name: 0 for name, *_ in cases}
    draws = itertools.chain.from_iterable(itertools.repeat(cases, estimates))
    for k, (name, model, region, truth) in enumerate(draws):
        est = estimate_region_mean(
            model, region, n_samples=n_samples, seed=int(seeds[k].generate_state(1)[0]), n_bootstrap=n_bootstrap
        )
        hits[name] += abs(est.estimate - truth) <= 4.0 * est.std_error

    required = math.ceil(MIN_COVERAGE * estimates)
    passed = all(h >= required for h in hits.values())
    detail = ", ".join(f"{name} {h}/{estimates}" for name, h in hits.items())
    return CheckResult("region means", passed, f"{detail} within 4 bootstrap standard errors (need {required})")


CHECKS: List[Callable[[], CheckResult]] = [
    check_mixture_equivalence,
    check_shattering,
    check_representativeness,
    check_region_means,
]


def run_selftest(console: Optional[Console] = None) -> List[CheckResult]:
    """Run every check and print a summary table."""
    console = console or Console()
    results = []
    for check in CHECKS:
        started = time.perf_counter()
        result = check()
        result = CheckResult(result.name, result.passed, result.detail, time.perf_counter() - started)
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, f"Selftest {result.name}: {'pass' if result.passed else 'FAIL'} ({result.detail})")
        results.append(result)

    table = Table(title="maskbuy selftest")
    table.add_column("check")
    table.add_column("result")
    table.add_column("detail")
    table.add_column("seconds", justify="right")
    for r in results:
        table.add_row(r.name, "[green]pass[/green]" if r.passed else "[red]FAIL[/red]", r.detail, f"{r.seconds:.2f}")
    console.print(table)
    return results
