"""
Reference buyer strategies.

Fixed rules used as regret baselines and as the myopic comparator.
"""

from typing import Mapping, Optional

from ..market.oracle import ConditionalValueTable, oracle_decision
from ..market.types import BuyerStrategy, MaskValue, mask_key
from ..utils.errors import InvalidArgumentError


class AlwaysBuy(BuyerStrategy):
    name = "always-buy"

    def decide(self, mask: MaskValue, price: float) -> int:
        return 1


class NeverBuy(BuyerStrategy):
    name = "never-buy"

    def decide(self, mask: MaskValue, price: float) -> int:
        return 0


class RandomBuy(BuyerStrategy):
    """Buys with a fixed probability, ignoring the round."""

    name = "random-buy"

    def __init__(self, prob: float = 0.5):
        super().__init__()
        if not 0.0 <= prob <= 1.0:
            raise InvalidArgumentError("prob must lie in [0, 1]", field="prob")
        self.prob = prob

    def decide(self, mask: MaskValue, price: float) -> int:
        return int(self.rng.random() < self.prob)


class FixedThreshold(BuyerStrategy):
    """
    Threshold policy: buy iff the threshold for the mask value is at least the price.

    Mask values missing from ``thresholds`` use ``default``.
    """

    name = "fixed-threshold"

    def __init__(self, thresholds: Optional[Mapping[int, float]] = None, default: float = 0.0):
        super().__init__()
        self.thresholds = {int(k): float(v) for k, v in (thresholds or {}).items()}
        self.default = float(default)

    def decide(self, mask: MaskValue, price: float) -> int:
        return int(self.thresholds.get(mask_key(mask), self.default) >= price)


class OracleStrategy(BuyerStrategy):
    """Myopic comparator driven by the true conditional value table."""

    name = "oracle"

    def __init__(self, table: ConditionalValueTable):
        super().__init__()
        self.table = table

    def decide(self, mask: MaskValue, price: float) -> int:
        cond = self.table.cond_values.get(mask_key(mask))
        if cond is None:
            return 0
        return oracle_decision(cond, price)
