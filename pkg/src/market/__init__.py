"""
Auction market: types, protocol loop, environments, prices and the oracle.
"""

from .environments import EnvModel, make_finite_env, make_simhash_env
from .oracle import conditional_value, conditional_value_table, oracle_decision, regret
from .protocol import ProtocolSession, buyer_utility, run_protocol
from .types import BuyerKnowledge, BuyerStrategy, RoundRecord, Transcript

__all__ = [
    "BuyerKnowledge",
    "BuyerStrategy",
    "EnvModel",
    "ProtocolSession",
    "RoundRecord",
    "Transcript",
    "buyer_utility",
    "conditional_value",
    "conditional_value_table",
    "make_finite_env",
    "make_simhash_env",
    "oracle_decision",
    "regret",
    "run_protocol",
]
