"""
Myopic oracle and regret accounting.

The oracle knows the item distribution and the mask and buys iff
E[v*(x) | h(x)] > p. Regret compares it to a buyer on the realized rounds.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from ..utils.errors import InvalidArgumentError, NoMassError
from .environments import EnvModel, FiniteItemModel
from .types import MaskValue, Transcript, mask_key

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_SAMPLES = 200_000
DEFAULT_ORACLE_SEED = 20_240_601

# (model fingerprint, n_samples, seed) -> table; one per process
_TABLE_CACHE: Dict[Tuple[str, int, int], "ConditionalValueTable"] = {}


@dataclass(frozen=True)
class ConditionalValueTable:
    """Per mask key: E[v* | h = key], its mass and (for Monte-Carlo tables) the standard error."""

    cond_values: Dict[int, float]
    masses: Dict[int, float]
    std_errors: Dict[int, float] = field(default_factory=dict)
    exact: bool = True
    n_samples: int = 0

    def value(self, key: int) -> float:
        if self.masses.get(key, 0.0) <= 0.0:
            raise NoMassError(f"mask value {key} has zero mass")
        return self.cond_values[key]

    @property
    def eta_min(self) -> float:
        """Smallest nonzero mask probability."""
        positive = [m for m in self.masses.values() if m > 0]
        return min(positive)


def _finite_table(env: EnvModel) -> ConditionalValueTable:
    model: FiniteItemModel = env.item_model
    keys = env.mask.mask_map
    cond_values: Dict[int, float] = {}
    masses: Dict[int, float] = {}
    for key in range(1, env.mask_cardinality + 1):
        members = keys == key
        mass = float(model.probs[members].sum())
        masses[key] = mass
        if mass > 0:
            cond_values[key] = float(np.dot(model.values_table[members], model.probs[members]) / mass)
    return ConditionalValueTable(cond_values=cond_values, masses=masses, exact=True)


def _monte_carlo_table(env: EnvModel, n_samples: int, seed: int) -> ConditionalValueTable:
    rng = np.random.default_rng(seed)
    X = env.sample_items(rng, n_samples)
    keys = env.mask_keys(X)
    values = env.values(X)

    size = env.mask_cardinality + 1
    counts = np.bincount(keys, minlength=size)
    sums = np.bincount(keys, weights=values, minlength=size)
    sq_sums = np.bincount(keys, weights=values**2, minlength=size)

    cond_values: Dict[int, float] = {}
    masses: Dict[int, float] = {}
    std_errors: Dict[int, float] = {}
    for key in range(1, size):
        count = int(counts[key])
        masses[key] = count / n_samples
        if count == 0:
            continue
        mean = sums[key] / count
        cond_values[key] = float(mean)
        var = max(sq_sums[key] / count - mean**2, 0.0)
        std_errors[key] = float(np.sqrt(var / count))

    return ConditionalValueTable(
        cond_values=cond_values, masses=masses, std_errors=std_errors, exact=False, n_samples=n_samples
    )


def conditional_value_table(
    env: EnvModel,
    n_samples: int = DEFAULT_ORACLE_SAMPLES,
    seed: int = DEFAULT_ORACLE_SEED,
) -> ConditionalValueTable:
    """
    Conditional values and masses for every mask key.

    Finite envs are computed exactly; continuous envs by Monte Carlo with a
    dedicated seed. Tables are cached per process.
    """
    if env.family == "finite":
        cache_key = (env.model_fingerprint(), 0, 0)
    else:
        cache_key = (env.model_fingerprint(), n_samples, seed)

    table = _TABLE_CACHE.get(cache_key)
    if table is None:
        if env.family == "finite":
            table = _finite_table(env)
        else:
            table = _monte_carlo_table(env, n_samples, seed)
            logger.info(f"Oracle table estimated from {n_samples} samples over {env.mask_cardinality} patterns")
        _TABLE_CACHE[cache_key] = table
    return table


def conditional_value(
    env: EnvModel,
    mask: MaskValue,
    n_samples: int = DEFAULT_ORACLE_SAMPLES,
    seed: int = DEFAULT_ORACLE_SEED,
) -> float:
    """
    E[v*(x) | h(x) = mask].

    Args:
        env: Environment
        mask: Mask index or sign pattern
        n_samples: Monte-Carlo sample count for continuous envs
        seed: Oracle seed for continuous envs

    Returns:
        Conditional value in [0, H]

    Raises:
        NoMassError: If the mask value has zero (estimated) mass
    """
    return conditional_value_table(env, n_samples, seed).value(mask_key(mask))


def oracle_decision(cond_value: float, price: float) -> int:
    """Myopic oracle: buy iff the conditional value strictly exceeds the price."""
    return int(cond_value > price)


@dataclass
class RegretLedger:
    """Per-round oracle decisions, regret contributions and running totals."""

    oracle_decisions: np.ndarray
    contributions: np.ndarray
    cumulative: np.ndarray

    @property
    def total(self) -> float:
        return float(self.cumulative[-1]) if self.cumulative.size else 0.0


def regret(
    transcript: Transcript,
    env: EnvModel,
    table: Optional[ConditionalValueTable] = None,
) -> RegretLedger:
    """
    Realized regret of a transcript against the myopic oracle.

    Each round contributes (v*(x_t) - p_t) * (s*_t - s_t) using the
    ground-truth item recorded by the protocol.

    Raises:
        InvalidArgumentError: If the transcript was not produced under ``env``
    """
    if transcript.env_fingerprint and transcript.env_fingerprint != env.fingerprint():
        raise InvalidArgumentError("transcript was produced under a different environment", field="env")
    if len(transcript.records) != len(transcript.true_values):
        raise InvalidArgumentError("transcript is missing its ground-truth side channel", field="transcript")

    if table is None:
        table = conditional_value_table(env)

    count = len(transcript.records)
    oracle = np.zeros(count, dtype=int)
    contributions = np.zeros(count)
    missing = 0

    for idx, record in enumerate(transcript.records):
        key = mask_key(record.mask)
        cond = table.cond_values.get(key)
        if cond is None:
            # pattern unseen by the Monte-Carlo oracle
            missing += 1
            s_star = 0
        else:
            s_star = oracle_decision(cond, record.price)
        oracle[idx] = s_star
        if s_star != record.decision:
            contributions[idx] = (transcript.true_values[idx] - record.price) * (s_star - record.decision)

    if missing:
        logger.warning(f"{missing} rounds had a mask value with no oracle estimate; oracle assumed to pass")

    return RegretLedger(oracle_decisions=oracle, contributions=contributions, cumulative=np.cumsum(contributions))
