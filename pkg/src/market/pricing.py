"""
Seller price processes.

Every process is keyed by the integer mask key, never by the item, so the
posted price in round t depends only on (t, h(x_t)).
"""

import hashlib
import logging
from abc import ABC, abstractmethod
from typing import Callable, Dict, FrozenSet, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import InvalidArgumentError, ProtocolViolationError

logger = logging.getLogger(__name__)


class PriceDistribution(ABC):
    """A distribution over posted prices for one mask value."""

    kind = "distribution"

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> float:
        """Draw one price."""

    @abstractmethod
    def support(self) -> Tuple[float, float]:
        """Smallest interval containing every possible draw."""

    @abstractmethod
    def describe(self) -> Dict:
        """JSON-ready description, also used for fingerprints."""


class UniformPrice(PriceDistribution):
    kind = "uniform"

    def __init__(self, low: float, high: float):
        if high < low:
            raise InvalidArgumentError(f"high {high} below low {low}", field="high")
        self.low = float(low)
        self.high = float(high)

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high))

    def support(self) -> Tuple[float, float]:
        return self.low, self.high

    def describe(self) -> Dict:
        return {"kind": self.kind, "low": self.low, "high": self.high}


class PointPrice(PriceDistribution):
    kind = "point"

    def __init__(self, value: float):
        self.value = float(value)

    def sample(self, rng: np.random.Generator) -> float:
        return self.value

    def support(self) -> Tuple[float, float]:
        return self.value, self.value

    def describe(self) -> Dict:
        return {"kind": self.kind, "value": self.value}


class DiscretePrice(PriceDistribution):
    kind = "discrete"

    def __init__(self, values: Sequence[float], probs: Sequence[float]):
        self.values = np.asarray(values, dtype=float)
        self.probs = np.asarray(probs, dtype=float)
        if self.values.shape != self.probs.shape or self.values.size == 0:
            raise InvalidArgumentError("values and probs must be non-empty and the same length", field="probs")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("price probabilities must be nonnegative and sum to 1", field="probs")

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.values[rng.choice(self.values.size, p=self.probs)])

    def support(self) -> Tuple[float, float]:
        return float(self.values.min()), float(self.values.max())

    def describe(self) -> Dict:
        return {"kind": self.kind, "values": self.values.tolist(), "probs": self.probs.tolist()}


class PriceProcess(ABC):
    """Posted-price process over mask keys 1..K."""

    def __init__(self, keys: Iterable[int], H: float):
        self.keys: FrozenSet[int] = frozenset(int(k) for k in keys)
        self.H = float(H)

    @abstractmethod
    def price(self, t: int, key: int, rng: Optional[np.random.Generator] = None) -> float:
        """Price posted in round t (1-based) to an item whose mask key is ``key``."""

    @abstractmethod
    def describe(self) -> Dict:
        """JSON-ready description, also used for fingerprints."""


class StochasticPriceProcess(PriceProcess):
    """I.i.d. prices per round, drawn from a per-mask distribution."""

    def __init__(
        self,
        distributions: Mapping[int, PriceDistribution],
        H: float = 1.0,
        seed: Optional[int] = None,
    ):
        super().__init__(distributions.keys(), H)
        self.distributions: Dict[int, PriceDistribution] = {int(k): v for k, v in distributions.items()}
        self._own_rng = np.random.default_rng(seed) if seed is not None else None

        for key, dist in self.distributions.items():
            low, high = dist.support()
            if low < 0 or high > self.H:
                raise InvalidArgumentError(
                    f"price distribution for mask {key} has support [{low}, {high}] outside [0, {self.H}]",
                    field="distributions",
                )

    def price(self, t: int, key: int, rng: Optional[np.random.Generator] = None) -> float:
        generator = rng if rng is not None else self._own_rng
        if generator is None:
            raise InvalidArgumentError("no RNG supplied and the process was built without a seed", field="rng")
        return self.distributions[key].sample(generator)

    def describe(self) -> Dict:
        return {
            "type": "stochastic",
            "H": self.H,
            "distributions": {str(k): self.distributions[k].describe() for k in sorted(self.distributions)},
        }


class AdversarialPriceProcess(PriceProcess):
    """
    Oblivious adversary: the whole (t, mask) -> price table is fixed at
    construction and never consults the run.
    """

    def __init__(self, generator: str, table: np.ndarray, H: float = 1.0, params: Optional[Dict] = None):
        table = np.asarray(table, dtype=float)
        super().__init__(range(1, table.shape[1] + 1), H)
        if np.any(table < 0) or np.any(table > self.H):
            raise InvalidArgumentError("adversarial prices must lie in [0, H]", field="table")
        table.setflags(write=False)
        self.generator = generator
        self.table = table
        self.params = dict(params or {})

    @property
    def horizon(self) -> int:
        return int(self.table.shape[0])

    def price(self, t: int, key: int, rng: Optional[np.random.Generator] = None) -> float:
        if t < 1 or t > self.horizon:
            raise ProtocolViolationError(f"round {t} outside the materialized price table (T={self.horizon})")
        return float(self.table[t - 1, key - 1])

    def describe(self) -> Dict:
        return {
            "type": "adversarial",
            "generator": self.generator,
            "H": self.H,
            "params": self.params,
            "table_sha": _table_digest(self.table),
        }


def _table_digest(table: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(table).tobytes()).hexdigest()


def stochastic_price_process(
    distributions: Mapping[int, PriceDistribution],
    seed: Optional[int] = None,
    H: float = 1.0,
) -> StochasticPriceProcess:
    """
    Build an i.i.d. price process keyed by mask value.

    Args:
        distributions: Price distribution per mask key
        seed: Optional seed for standalone draws; runs pass their own price stream
        H: Price cap

    Returns:
        StochasticPriceProcess
    """
    return StochasticPriceProcess(distributions, H=H, seed=seed)


def _require_cond_values(generator: str, cond_values: Optional[Mapping[int, float]]) -> Mapping[int, float]:
    if cond_values is None:
        raise InvalidArgumentError(f"generator '{generator}' needs the conditional value table", field="cond_values")
    return cond_values


def _threshold_sweep(
    T: int,
    K: int,
    rng: np.random.Generator,
    H: float,
    cond_values: Optional[Mapping[int, float]],
    sweep_width: float = 0.2,
    sweep_points: int = 9,
) -> np.ndarray:
    cond_values = _require_cond_values("threshold-sweep", cond_values)
    sweep_points = int(sweep_points)
    offsets = np.linspace(-sweep_width, sweep_width, sweep_points) * H
    rounds = np.arange(T)
    table = np.empty((T, K))
    for key in range(1, K + 1):
        centre = cond_values.get(key, H / 2)
        grid = np.clip(centre + offsets, 0.0, H)
        phase = int(rng.integers(sweep_points))
        table[:, key - 1] = grid[(rounds + phase) % sweep_points]
    return table


def _periodic_spike(
    T: int,
    K: int,
    rng: np.random.Generator,
    H: float,
    cond_values: Optional[Mapping[int, float]],
    period: int = 10,
    low_fraction: float = 0.3,
) -> np.ndarray:
    period = int(period)
    if period < 1:
        raise InvalidArgumentError("period must be at least 1", field="period")
    if not 0 <= low_fraction < 1:
        raise InvalidArgumentError("low_fraction must lie in [0, 1)", field="low_fraction")
    table = rng.uniform(0.0, low_fraction * H, size=(T, K))
    spikes = np.arange(1, T + 1) % period == 0
    table[spikes, :] = H
    return table


def _near_oracle(
    T: int,
    K: int,
    rng: np.random.Generator,
    H: float,
    cond_values: Optional[Mapping[int, float]],
    epsilon: float = 0.05,
) -> np.ndarray:
    cond_values = _require_cond_values("near-oracle", cond_values)
    # odd rounds sit epsilon below the conditional value, even rounds above
    signs = np.where(np.arange(1, T + 1) % 2 == 1, -1.0, 1.0)
    table = np.empty((T, K))
    for key in range(1, K + 1):
        centre = cond_values.get(key, H / 2)
        table[:, key - 1] = np.clip(centre + signs * epsilon, 0.0, H)
    return table


GENERATORS: Dict[str, Callable[..., np.ndarray]] = {
    "threshold-sweep": _threshold_sweep,
    "periodic-spike": _periodic_spike,
    "near-oracle": _near_oracle,
}


def adversarial_price_process(
    generator: str,
    T: int,
    mask_cardinality: int,
    seed: int,
    H: float = 1.0,
    cond_values: Optional[Mapping[int, float]] = None,
    **params,
) -> AdversarialPriceProcess:
    """
    Materialize an oblivious adversarial price table.

    Args:
        generator: One of ``threshold-sweep``, ``periodic-spike``, ``near-oracle``
        T: Number of rounds covered by the table
        mask_cardinality: Number of mask keys K
        seed: Seed for the generator's randomness
        H: Price cap
        cond_values: Conditional value per mask key (needed by the sweep and near-oracle generators)
        **params: Generator parameters (period, low_fraction, epsilon, sweep_width, sweep_points)

    Returns:
        AdversarialPriceProcess with a read-only (T, K) table
    """
    if generator not in GENERATORS:
        raise InvalidArgumentError(
            f"unknown generator '{generator}', expected one of {sorted(GENERATORS)}", field="generator"
        )
    if T < 1 or mask_cardinality < 1:
        raise InvalidArgumentError("T and mask_cardinality must be positive", field="T")

    rng = np.random.default_rng(seed)
    table = GENERATORS[generator](T, mask_cardinality, rng, H, cond_values, **params)
    logger.info(f"Materialized '{generator}' price table: T={T}, masks={mask_cardinality}")
    return AdversarialPriceProcess(generator, table, H=H, params={"seed": seed, **params})
