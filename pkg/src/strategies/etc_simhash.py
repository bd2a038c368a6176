"""
Explore-then-commit for SimHash masks with a known item distribution.

During exploration the buyer purchases every item and records (x_t, h(x_t)).
It then recovers separators by linear feasibility and, for each sign pattern
it meets, estimates the conditional value over the pattern's polytope by
Monte Carlo. ``doubling_runner`` handles an unknown horizon with epochs of
length 2^i T0.
"""

import json
import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from ..market.environments import ContinuousItemModel, EnvModel
from ..market.geometry import PolytopeRegion, RegionEstimate, Separators, estimate_region_mean, recover_separators
from ..market.protocol import ProtocolSession
from ..market.types import BuyerKnowledge, BuyerStrategy, Item, MaskValue, Transcript
from ..utils.errors import (
    ContractViolationError,
    InvalidArgumentError,
    NoMassError,
    PhaseViolationError,
    ProtocolViolationError,
)

logger = logging.getLogger(__name__)


def exploration_length(T: int, d: int, ell: int, delta: float, c: float = 1.0) -> int:
    """
    ceil(c sqrt(4 T d ell ln(ell/delta))), capped at floor(T/2).

    Raises:
        InvalidArgumentError: If ell/delta <= 1 or an argument is out of range
    """
    if T < 1 or d < 1 or ell < 1:
        raise InvalidArgumentError("T, d and ell must be positive", field="T")
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError("delta must lie in (0, 1)", field="delta")
    if delta >= ell:
        raise InvalidArgumentError("ln(ell/delta) must be positive", field="delta")
    if c <= 0:
        raise InvalidArgumentError("schedule multiplier c must be positive", field="c")
    raw = c * math.sqrt(4.0 * T * d * ell * math.log(ell / delta))
    return min(math.ceil(raw), T // 2)


class ETCSimHash(BuyerStrategy):
    """Explore-then-commit buyer for SimHash masks."""

    name = "etc-simhash"

    def __init__(
        self,
        c: float = 1.0,
        delta: float = 0.05,
        n_samples: int = 50_000,
        n_bootstrap: int = 200,
        debug_path: Optional[Union[str, Path]] = None,
    ):
        super().__init__()
        if c <= 0:
            raise InvalidArgumentError("schedule multiplier c must be positive", field="c")
        self.c = c
        self.delta = delta
        self.n_samples = n_samples
        self.n_bootstrap = n_bootstrap
        self.debug_path = Path(debug_path) if debug_path else None

        self.t = 0
        self.t_prime = 0
        self.separators: Optional[Separators] = None
        self.cache: Dict[tuple, Optional[RegionEstimate]] = {}
        self.estimations = 0
        self.no_mass_rounds = 0
        self._points: List[np.ndarray] = []
        self._patterns: List[tuple] = []
        self._last_mask: Optional[tuple] = None

    @property
    def item_model(self) -> ContinuousItemModel:
        return self.knowledge.item_model

    def bind(self, knowledge: BuyerKnowledge, rng: np.random.Generator) -> None:
        if not isinstance(knowledge.item_model, ContinuousItemModel):
            raise InvalidArgumentError("ETC-SimHash needs a known continuous item model", field="env")
        super().bind(knowledge, rng)
        self.t_prime = exploration_length(knowledge.horizon, knowledge.d, knowledge.ell, self.delta, self.c)
        logger.debug(f"ETC-SimHash: T={knowledge.horizon}, d={knowledge.d}, ell={knowledge.ell}, t'={self.t_prime}")

    @property
    def exploring(self) -> bool:
        return self.t <= self.t_prime and self.separators is None

    def decide(self, mask: MaskValue, price: float) -> int:
        self.t += 1
        if self.t > self.knowledge.horizon:
            raise ProtocolViolationError(f"round {self.t} past horizon {self.knowledge.horizon}")
        self._last_mask = tuple(mask)
        if self.exploring:
            return 1
        if self.separators is None:
            # no exploration round at all
            self.no_mass_rounds += 1
            return 0

        estimate = self.region_estimate(self._last_mask)
        if estimate is None:
            self.no_mass_rounds += 1
            return 0
        return int(estimate.estimate >= price)

    def feedback(self, item: Optional[Item], utility: float) -> None:
        if not self.exploring or item is None:
            return
        self._points.append(np.asarray(item, dtype=float))
        self._patterns.append(self._last_mask)
        if self.t == self.t_prime:
            self.commit()

    def commit(self, separators: Optional[Separators] = None) -> Separators:
        """
        End exploration, recovering separators from the exploration samples
        unless ``separators`` are given.
        """
        if self.separators is not None:
            raise PhaseViolationError("separators were already committed")
        if separators is None:
            separators = recover_separators(np.vstack(self._points), np.array(self._patterns, dtype=int))
        self.separators = separators
        logger.debug(f"ETC-SimHash committed after {len(self._points)} samples")
        if self.debug_path is not None:
            self._debug_write({"event": "separators", "round": self.t, "w": separators.to_list()})
        return separators

    def region_estimate(self, pattern: tuple) -> Optional[RegionEstimate]:
        """Cached conditional-value estimate for a pattern; None when the region has no mass."""
        if pattern in self.cache:
            return self.cache[pattern]

        region = PolytopeRegion.from_pattern(self.separators, pattern)
        seed = int(self.rng.integers(2**63))
        self.estimations += 1
        try:
            estimate: Optional[RegionEstimate] = estimate_region_mean(
                self.item_model, region, n_samples=self.n_samples, seed=seed, n_bootstrap=self.n_bootstrap
            )
        except NoMassError:
            logger.debug(f"Pattern {pattern} has no mass under the recovered separators")
            estimate = None
        self.cache[pattern] = estimate

        if self.debug_path is not None:
            self._debug_write(
                {
                    "event": "pattern",
                    "pattern": list(pattern),
                    "estimate": None if estimate is None else estimate.estimate,
                    "std_error": None if estimate is None else estimate.std_error,
                    "accepted": 0 if estimate is None else estimate.accepted,
                    "value_variance": None if estimate is None else estimate.value_variance,
                }
            )
        return estimate

    def _debug_write(self, payload: Dict) -> None:
        self.debug_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.debug_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(payload) + "\n")


def epoch_lengths(T0: int, budget: int) -> List[int]:
    """Epoch lengths 2T0, 4T0, ... with the last one truncated to the budget."""
    if T0 < 2:
        raise InvalidArgumentError("T0 must be at least 2", field="T0")
    lengths = []
    used = 0
    i = 1
    while used < budget:
        length = min((2**i) * T0, budget - used)
        lengths.append(length)
        used += length
        i += 1
    return lengths


def doubling_runner(
    T0: int,
    strategy_factory: Callable[[int], BuyerStrategy],
    env: EnvModel,
    budget: int,
    seed: int = 0,
) -> Transcript:
    """
    Play fresh strategy instances over epochs of length 2^i T0.

    Epoch i tells its strategy the horizon 2^i T0; the final epoch is cut
    short when the budget runs out. All epochs share one item/price path.

    Args:
        T0: Base epoch length (>= 2)
        strategy_factory: Builds a new strategy for a given horizon
        env: Environment
        budget: Total number of rounds
        seed: Master seed

    Returns:
        Concatenated transcript with per-epoch lengths in ``epochs``
    """
    if budget < 1:
        raise InvalidArgumentError("budget must be at least 1", field="budget")

    session = ProtocolSession(env, seed)
    strategies: List[BuyerStrategy] = []
    for i, length in enumerate(epoch_lengths(T0, budget), start=1):
        strategy = strategy_factory((2**i) * T0)
        if any(s is strategy for s in strategies) or strategy.knowledge is not None:
            raise ContractViolationError("strategy factory must return a fresh instance per epoch")
        strategies.append(strategy)
        session.play(strategy, length, horizon=(2**i) * T0)
        logger.debug(f"Doubling epoch {i}: {length} rounds (horizon {(2**i) * T0})")
    return session.transcript
