"""
Round-by-round posted-price protocol.

Each round the seller draws an item, posts a price that depends only on the
item's mask value, and the buyer decides from (mask, price) alone. The item
is revealed to the buyer only after a purchase.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from ..utils.errors import ContractViolationError, InvalidArgumentError
from .environments import EnvModel
from .types import BuyerStrategy, RoundRecord, Transcript

logger = logging.getLogger(__name__)


def buyer_utility(value: float, price: float, decision: int) -> float:
    """Utility (value - price) * decision."""
    if not decision:
        return 0.0
    return float(value - price)


def derive_streams(seed: int) -> Tuple[np.random.SeedSequence, np.random.SeedSequence, np.random.SeedSequence]:
    """Split a master seed into independent item, price and strategy seed sequences."""
    item_seq, price_seq, strategy_seq = np.random.SeedSequence(seed).spawn(3)
    return item_seq, price_seq, strategy_seq


def _as_bit(decision) -> int:
    if isinstance(decision, (bool, np.bool_)):
        return int(decision)
    if isinstance(decision, (int, np.integer)) and int(decision) in (0, 1):
        return int(decision)
    raise ContractViolationError(f"decision must be 0 or 1, got {decision!r}")


class ProtocolSession:
    """
    A stateful run over one environment and seed.

    Rounds are numbered globally across successive ``play`` calls, so several
    strategies can be chained over one item and price path (the doubling
    runner does this).
    """

    def __init__(self, env: EnvModel, seed: int):
        if env.price_process is None:
            raise InvalidArgumentError("environment has no price process attached", field="env")
        self.env = env
        self.seed = seed
        item_seq, price_seq, self._strategy_seq = derive_streams(seed)
        self._item_rng = np.random.default_rng(item_seq)
        self._price_rng = np.random.default_rng(price_seq)
        self.t = 0
        self.transcript = Transcript(
            records=[],
            horizon=0,
            seed=seed,
            env_fingerprint=env.fingerprint(),
        )

    def play(self, strategy: BuyerStrategy, rounds: int, horizon: Optional[int] = None) -> Transcript:
        """
        Bind a fresh strategy and play ``rounds`` rounds with it.

        Args:
            strategy: Unbound strategy instance
            rounds: Number of rounds to play
            horizon: Horizon the strategy is told (defaults to ``rounds``)

        Returns:
            The session transcript so far
        """
        if rounds < 1:
            raise InvalidArgumentError("horizon must be at least 1", field="T")

        strategy_rng = np.random.default_rng(self._strategy_seq.spawn(1)[0])
        strategy.bind(self.env.knowledge(horizon or rounds), strategy_rng)

        items = self.env.sample_items(self._item_rng, rounds)
        keys = self.env.mask_keys(items)
        masks = self.env.mask_values(items)
        values = self.env.values(items)

        records = self.transcript.records
        for k in range(rounds):
            self.t += 1
            item = items[k] if items.ndim > 1 else int(items[k])
            key = int(keys[k])
            price = self.env.price(self.t, key, self._price_rng)

            decision = _as_bit(strategy.decide(masks[k], price))
            value = float(values[k])
            utility = buyer_utility(value, price, decision)
            revealed = item if decision else None
            strategy.feedback(revealed, utility)

            records.append(
                RoundRecord(
                    t=self.t,
                    mask=masks[k],
                    price=price,
                    decision=decision,
                    utility=utility,
                    revealed_item=revealed,
                )
            )
            self.transcript.true_items.append(item)
            self.transcript.true_values.append(value)

        self.transcript.horizon = self.t
        self.transcript.epochs.append(rounds)
        return self.transcript


def run_protocol(env: EnvModel, strategy: BuyerStrategy, T: int, seed: int) -> Transcript:
    """
    Run the protocol for T rounds.

    Item draws, price draws and the strategy's randomness come from separate
    streams of ``seed``, so identical inputs give identical transcripts.

    Args:
        env: Environment with a price process attached
        strategy: Freshly constructed strategy
        T: Horizon
        seed: Master seed

    Returns:
        Transcript with exactly T records

    Raises:
        InvalidArgumentError: If T < 1
    """
    if T < 1:
        raise InvalidArgumentError("horizon must be at least 1", field="T")
    session = ProtocolSession(env, seed)
    return session.play(strategy, T)
