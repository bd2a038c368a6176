"""
Explore-then-commit for arbitrary finite masks.

The buyer purchases unconditionally for t' rounds, estimating the mass
eta_i and the value mass v_i of each mask index, then commits to buying
iff v_i / eta_i >= p.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..market.types import BuyerKnowledge, BuyerStrategy, Item, MaskValue, mask_key
from ..utils.errors import InvalidArgumentError, PhaseViolationError, ProtocolViolationError

logger = logging.getLogger(__name__)

SCHEDULES = ("unknown-eta", "known-eta")


@dataclass
class FrequencyEstimates:
    """Running estimates of eta_i and v_i = E[v* 1(h = i)] over the exploration phase."""

    eta_hat: np.ndarray
    v_hat: np.ndarray
    t_prime: int
    updates: int = 0

    @classmethod
    def empty(cls, n: int, t_prime: int) -> "FrequencyEstimates":
        return cls(eta_hat=np.zeros(n), v_hat=np.zeros(n), t_prime=t_prime)

    @property
    def exploring(self) -> bool:
        return self.updates < self.t_prime

    def conditional_estimate(self, i: int) -> float:
        """Z_hat = v_i / eta_i, or 0 for an index never seen."""
        eta = self.eta_hat[i - 1]
        return float(self.v_hat[i - 1] / eta) if eta > 0 else 0.0


def explore_update(est: FrequencyEstimates, mask: int, value: float) -> FrequencyEstimates:
    """
    Record one exploration round: eta_i += 1/t', v_i += v/t'.

    Raises:
        PhaseViolationError: If all t' exploration rounds were already recorded
    """
    if not est.exploring:
        raise PhaseViolationError(f"exploration finished after {est.t_prime} rounds")
    est.eta_hat[mask - 1] += 1.0 / est.t_prime
    est.v_hat[mask - 1] += value / est.t_prime
    est.updates += 1
    return est


def exploit_decision(est: FrequencyEstimates, mask: int, price: float) -> int:
    """Buy iff Z_hat >= price (non-strict)."""
    return int(est.conditional_estimate(mask) >= price)


def _check_multiplier(c: float) -> None:
    if c <= 0:
        raise InvalidArgumentError("schedule multiplier c must be positive", field="c")


def unknown_eta_length(T: int, n: int, c: float = 1.0) -> float:
    """Uncapped c T^(3/4) n^(1/2) ln(4nT)."""
    _check_multiplier(c)
    if T < 1 or n < 1:
        raise InvalidArgumentError("T and n must be positive", field="T")
    return c * T**0.75 * math.sqrt(n) * math.log(4 * n * T)


def known_eta_length(T: int, n: int, eta_min: float, c: float = 1.0) -> float:
    """Uncapped c 9 T^(2/3) ln(4nT) / eta_min."""
    _check_multiplier(c)
    if not 0.0 < eta_min <= 1.0:
        raise InvalidArgumentError("eta_min must lie in (0, 1]", field="eta_min")
    if T < 1 or n < 1:
        raise InvalidArgumentError("T and n must be positive", field="T")
    return c * 9.0 * T ** (2.0 / 3.0) * math.log(4 * n * T) / eta_min


def cap_exploration(raw: float, T: int) -> int:
    """ceil(raw) capped at floor(T/2)."""
    return min(math.ceil(raw), T // 2)


def schedule_unknown_eta(T: int, n: int, c: float = 1.0) -> int:
    """Exploration length when the mask distribution is unknown."""
    return cap_exploration(unknown_eta_length(T, n, c), T)


def schedule_known_eta(T: int, n: int, eta_min: float, c: float = 1.0) -> int:
    """Exploration length when the smallest nonzero mask mass is known."""
    return cap_exploration(known_eta_length(T, n, eta_min, c), T)


class ETCFinite(BuyerStrategy):
    """Explore-then-commit buyer over a finite mask."""

    name = "etc-finite"

    def __init__(self, c: float = 0.05, schedule: str = "unknown-eta", eta_min: Optional[float] = None):
        super().__init__()
        _check_multiplier(c)
        if schedule not in SCHEDULES:
            raise InvalidArgumentError(f"schedule must be one of {SCHEDULES}", field="schedule")
        if schedule == "known-eta" and eta_min is None:
            raise InvalidArgumentError("known-eta schedule needs eta_min", field="eta_min")
        self.c = c
        self.schedule = schedule
        self.eta_min = eta_min
        self.t = 0
        self.t_prime = 0
        self.capped = False
        self.estimates: Optional[FrequencyEstimates] = None
        self._last_price = 0.0
        self._last_mask = 0

    def bind(self, knowledge: BuyerKnowledge, rng: np.random.Generator) -> None:
        super().bind(knowledge, rng)
        T, n = knowledge.horizon, knowledge.mask_cardinality
        if self.schedule == "known-eta":
            raw = known_eta_length(T, n, self.eta_min, self.c)
        else:
            raw = unknown_eta_length(T, n, self.c)
        self.t_prime = cap_exploration(raw, T)
        self.capped = math.ceil(raw) > self.t_prime
        if self.capped:
            logger.debug(f"ETC exploration length {math.ceil(raw)} capped to {self.t_prime} (T={T})")
        self.estimates = FrequencyEstimates.empty(n, self.t_prime)
        logger.debug(f"ETC-finite: T={T}, n={n}, schedule={self.schedule}, t'={self.t_prime}")

    def decide(self, mask: MaskValue, price: float) -> int:
        self.t += 1
        if self.t > self.knowledge.horizon:
            raise ProtocolViolationError(f"round {self.t} past horizon {self.knowledge.horizon}")
        self._last_mask = mask_key(mask)
        self._last_price = price
        if self.t <= self.t_prime:
            return 1
        return exploit_decision(self.estimates, self._last_mask, price)

    def feedback(self, item: Optional[Item], utility: float) -> None:
        if self.t > self.t_prime or item is None:
            return
        # the buyer learns its own value from the realized utility
        value = min(max(utility + self._last_price, 0.0), self.knowledge.H)
        explore_update(self.estimates, self._last_mask, value)
        if not self.estimates.exploring:
            logger.debug(f"ETC-finite committed after {self.t_prime} rounds")
