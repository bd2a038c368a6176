"""
Core auction types.

Items, mask values, round records, transcripts and the buyer strategy
interface shared by every strategy and by the protocol loop.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple, Union

import numpy as np

from ..utils.errors import ContractViolationError

# A finite item is its integer id; a continuous item is a point in [0,1]^d.
Item = Union[int, np.ndarray]

# A finite mask value is an index in [1..n]; a SimHash mask value is a bit tuple.
MaskValue = Union[int, Tuple[int, ...]]


def pattern_key(bits: Tuple[int, ...]) -> int:
    """Map a sign pattern to its price-table key 1 + sum(bits[j] * 2**j)."""
    key = 1
    for j, bit in enumerate(bits):
        if bit:
            key += 1 << j
    return key


def key_to_pattern(key: int, ell: int) -> Tuple[int, ...]:
    """Inverse of pattern_key for patterns of length ell."""
    code = key - 1
    return tuple((code >> j) & 1 for j in range(ell))


def mask_key(mask: MaskValue) -> int:
    """Integer key of a mask value (the index itself, or the pattern key)."""
    if isinstance(mask, tuple):
        return pattern_key(mask)
    return int(mask)


@dataclass(frozen=True)
class RoundRecord:
    """What happened in one round of the protocol."""

    t: int
    mask: MaskValue
    price: float
    decision: int
    utility: float
    revealed_item: Optional[Item] = None


@dataclass
class Transcript:
    """
    Ordered per-round history of one protocol run.

    ``true_items`` and ``true_values`` are the ground-truth side channel used
    for regret accounting; strategies never see them.
    """

    records: List[RoundRecord]
    horizon: int
    seed: int
    true_items: List[Item] = field(default_factory=list)
    true_values: List[float] = field(default_factory=list)
    env_fingerprint: str = ""
    epochs: List[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def prices(self) -> np.ndarray:
        return np.array([r.price for r in self.records], dtype=float)

    def decisions(self) -> np.ndarray:
        return np.array([r.decision for r in self.records], dtype=int)

    def utilities(self) -> np.ndarray:
        return np.array([r.utility for r in self.records], dtype=float)

    def mask_keys(self) -> np.ndarray:
        return np.array([mask_key(r.mask) for r in self.records], dtype=int)


@dataclass(frozen=True)
class BuyerKnowledge:
    """
    What a buyer is told before the first round.

    ``item_model`` is only populated for environments whose item distribution
    and valuation are public (the SimHash family); the mask itself is never
    part of the buyer's knowledge.
    """

    H: float
    horizon: int
    mask_cardinality: int
    d: Optional[int] = None
    ell: Optional[int] = None
    item_model: Any = None


class BuyerStrategy(ABC):
    """
    Buyer side of the protocol.

    Each round the protocol calls ``decide(mask, price)`` and then
    ``feedback(item, utility)``. ``item`` is the purchased item when the
    decision was 1 and ``None`` otherwise, so an implementation has no way to
    learn an item it did not buy.
    """

    name = "strategy"

    def __init__(self):
        self.knowledge: Optional[BuyerKnowledge] = None
        self.rng: Optional[np.random.Generator] = None

    def bind(self, knowledge: BuyerKnowledge, rng: np.random.Generator) -> None:
        """Attach horizon/environment knowledge and the strategy's RNG stream."""
        if self.knowledge is not None:
            raise ContractViolationError(f"{self.name} is already bound; strategies are single-use")
        self.knowledge = knowledge
        self.rng = rng

    @abstractmethod
    def decide(self, mask: MaskValue, price: float) -> int:
        """Return the purchase decision (0 or 1) for this round."""

    def feedback(self, item: Optional[Item], utility: float) -> None:
        """Receive the purchased item (or None) and the realized utility."""
        return None
