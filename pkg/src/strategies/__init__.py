"""
Buyer strategies: Exp4.VC, explore-then-commit variants and baselines.
"""

from .baselines import AlwaysBuy, FixedThreshold, NeverBuy, OracleStrategy, RandomBuy
from .etc_finite import ETCFinite
from .etc_simhash import ETCSimHash, doubling_runner
from .exp4vc import Exp4VC
from .registry import build_factory, get_registry, is_doubling

__all__ = [
    "AlwaysBuy",
    "ETCFinite",
    "ETCSimHash",
    "Exp4VC",
    "FixedThreshold",
    "NeverBuy",
    "OracleStrategy",
    "RandomBuy",
    "build_factory",
    "doubling_runner",
    "get_registry",
    "is_doubling",
]
