"""
Environment families.

An EnvModel bundles the item distribution, the valuation, the mask and the
seller's price process. Prices are looked up by mask key only, so an item
never influences its price beyond h(x).
"""

import hashlib
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import InvalidArgumentError, NoMassError, retry_attempts
from .geometry import Separators, simhash_batch
from .pricing import PriceProcess
from .types import BuyerKnowledge, MaskValue

logger = logging.getLogger(__name__)

PROB_TOLERANCE = 1e-12


# ---------------------------------------------------------------------------
# Densities over [0,1]^d


class Density(ABC):
    kind = "density"

    def __init__(self, d: int):
        if d < 1:
            raise InvalidArgumentError("dimension must be at least 1", field="d")
        self.d = int(d)

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` points, shape (size, d)."""

    @abstractmethod
    def describe(self) -> Dict:
        """JSON-ready description."""


class UniformBoxDensity(Density):
    kind = "uniform"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random((size, self.d))

    def describe(self) -> Dict:
        return {"kind": self.kind, "d": self.d}


class TruncatedGaussianDensity(Density):
    """Gaussian with diagonal covariance restricted to the unit box (rejection sampled)."""

    kind = "truncated-gaussian"
    max_batches = 1000

    def __init__(self, mean: Sequence[float], std: Sequence[float]):
        mean = np.asarray(mean, dtype=float)
        std = np.asarray(std, dtype=float)
        super().__init__(mean.shape[0])
        if std.shape != mean.shape:
            raise InvalidArgumentError("mean and std must have the same length", field="std")
        if np.any(std <= 0):
            raise InvalidArgumentError("std entries must be positive", field="std")
        self.mean = mean
        self.std = std

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty((size, self.d))
        filled = 0
        batch = max(size, 64)
        for _ in range(self.max_batches):
            if filled >= size:
                break
            draws = rng.normal(self.mean, self.std, size=(batch, self.d))
            keep = draws[np.all((draws >= 0.0) & (draws <= 1.0), axis=1)]
            take = min(size - filled, keep.shape[0])
            out[filled : filled + take] = keep[:take]
            filled += take
        if filled < size:
            raise NoMassError("truncated Gaussian puts too little mass on the unit box")
        return out

    def describe(self) -> Dict:
        return {"kind": self.kind, "mean": self.mean.tolist(), "std": self.std.tolist()}


# ---------------------------------------------------------------------------
# Valuations (nonnegative and concave, capped at H)


class Valuation(ABC):
    kind = "valuation"

    def __init__(self, H: float):
        self.H = float(H)

    @abstractmethod
    def values(self, X: np.ndarray) -> np.ndarray:
        """v*(x) for a batch of points, each in [0, H]."""

    @abstractmethod
    def describe(self) -> Dict:
        """JSON-ready description."""


class LinearClippedValuation(Valuation):
    """v*(x) = min(H, a.x + b) with a, b >= 0."""

    kind = "linear-clipped"

    def __init__(self, weights: Sequence[float], intercept: float = 0.0, H: float = 1.0):
        super().__init__(H)
        self.weights = np.asarray(weights, dtype=float)
        self.intercept = float(intercept)
        if np.any(self.weights < 0) or self.intercept < 0:
            raise InvalidArgumentError("weights and intercept must be nonnegative", field="weights")

    def values(self, X: np.ndarray) -> np.ndarray:
        return np.minimum(self.H, np.atleast_2d(X) @ self.weights + self.intercept)

    def describe(self) -> Dict:
        return {"kind": self.kind, "weights": self.weights.tolist(), "intercept": self.intercept, "H": self.H}


class CoordinateMeanValuation(Valuation):
    kind = "coordinate-mean"

    def values(self, X: np.ndarray) -> np.ndarray:
        return self.H * np.atleast_2d(X).mean(axis=1)

    def describe(self) -> Dict:
        return {"kind": self.kind, "H": self.H}


class CoordinateValuation(Valuation):
    kind = "coordinate"

    def __init__(self, index: int = 0, H: float = 1.0):
        super().__init__(H)
        self.index = int(index)

    def values(self, X: np.ndarray) -> np.ndarray:
        return self.H * np.atleast_2d(X)[:, self.index]

    def describe(self) -> Dict:
        return {"kind": self.kind, "index": self.index, "H": self.H}


# ---------------------------------------------------------------------------
# Item models and masks


@dataclass(frozen=True)
class FiniteItemModel:
    """Finite item table with values v* and probabilities P."""

    values_table: np.ndarray
    probs: np.ndarray

    @property
    def size(self) -> int:
        return int(self.values_table.shape[0])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.size, size=size, p=self.probs)

    def values(self, items: np.ndarray) -> np.ndarray:
        return self.values_table[np.asarray(items, dtype=int)]

    def describe(self) -> Dict:
        return {"values": self.values_table.tolist(), "probs": self.probs.tolist()}


@dataclass(frozen=True)
class ContinuousItemModel:
    """Known density and valuation over the unit box."""

    density: Density
    valuation: Valuation

    @property
    def d(self) -> int:
        return self.density.d

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.density.sample(rng, size)

    def values(self, X: np.ndarray) -> np.ndarray:
        return self.valuation.values(X)

    def describe(self) -> Dict:
        return {"density": self.density.describe(), "valuation": self.valuation.describe()}


@dataclass(frozen=True)
class FiniteMask:
    """Explicit map from item id to mask index in [1..n]."""

    mask_map: np.ndarray
    n: int

    def keys(self, items: np.ndarray) -> np.ndarray:
        return self.mask_map[np.asarray(items, dtype=int)]

    def mask_values(self, items: np.ndarray) -> List[MaskValue]:
        return [int(k) for k in self.keys(items)]

    @property
    def cardinality(self) -> int:
        return self.n

    def describe(self) -> Dict:
        return {"mask_map": self.mask_map.tolist(), "n": self.n}


@dataclass(frozen=True)
class SimHashMask:
    """
    SimHash mask h_w(x) with price keys 1 + sum(bits[j] * 2**j).

    ``realized_keys`` lists the price keys whose region carries mass under
    the item density; the key space itself stays 1..2**ell.
    """

    separators: Separators
    realized_keys: Tuple[int, ...] = ()

    @property
    def ell(self) -> int:
        return self.separators.ell

    @property
    def cardinality(self) -> int:
        return 1 << self.ell

    def patterns(self, X: np.ndarray) -> np.ndarray:
        return simhash_batch(self.separators, X)

    def keys(self, X: np.ndarray) -> np.ndarray:
        return 1 + self.patterns(X).astype(np.int64) @ (1 << np.arange(self.ell, dtype=np.int64))

    def mask_values(self, X: np.ndarray) -> List[MaskValue]:
        return [tuple(int(b) for b in row) for row in self.patterns(X)]

    def describe(self) -> Dict:
        return {"separators": self.separators.to_list(), "realized_keys": list(self.realized_keys)}


@dataclass(frozen=True)
class EnvModel:
    """
    Ground-truth environment: item model, mask, price process and cap H.

    ``price_process`` may be None while the oracle table is being built; such
    an env can be queried for conditional values but not run.
    """

    item_model: object
    mask: object
    price_process: Optional[PriceProcess]
    H: float = 1.0
    name: str = ""

    @property
    def family(self) -> str:
        return "finite" if isinstance(self.item_model, FiniteItemModel) else "simhash"

    @property
    def mask_cardinality(self) -> int:
        return self.mask.cardinality

    @property
    def d(self) -> Optional[int]:
        return self.item_model.d if isinstance(self.item_model, ContinuousItemModel) else None

    @property
    def ell(self) -> Optional[int]:
        return self.mask.ell if isinstance(self.mask, SimHashMask) else None

    def sample_items(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.item_model.sample(rng, size)

    def values(self, items: np.ndarray) -> np.ndarray:
        return self.item_model.values(items)

    def mask_keys(self, items: np.ndarray) -> np.ndarray:
        return self.mask.keys(items)

    def mask_values(self, items: np.ndarray) -> List[MaskValue]:
        return self.mask.mask_values(items)

    def price(self, t: int, key: int, rng: Optional[np.random.Generator] = None) -> float:
        if self.price_process is None:
            raise InvalidArgumentError("environment has no price process attached", field="price_process")
        return self.price_process.price(t, key, rng)

    def with_prices(self, price_process: PriceProcess) -> "EnvModel":
        """Return a copy of this env with ``price_process`` attached (validated)."""
        _validate_price_process(price_process, self.mask_cardinality, self.H)
        return replace(self, price_process=price_process)

    def knowledge(self, horizon: int) -> BuyerKnowledge:
        """What a buyer is told up front; the item model only for SimHash envs."""
        return BuyerKnowledge(
            H=self.H,
            horizon=horizon,
            mask_cardinality=self.mask_cardinality,
            d=self.d,
            ell=self.ell,
            item_model=self.item_model if self.family == "simhash" else None,
        )

    def model_fingerprint(self) -> str:
        """Hash of the item model and mask (prices excluded)."""
        payload = {
            "family": self.family,
            "H": self.H,
            "items": self.item_model.describe(),
            "mask": self.mask.describe(),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def fingerprint(self) -> str:
        """Hash of the full environment including prices."""
        prices = self.price_process.describe() if self.price_process is not None else None
        payload = {"model": self.model_fingerprint(), "prices": prices}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _validate_price_process(price_process, mask_cardinality: int, H: float) -> None:
    if not isinstance(price_process, PriceProcess):
        raise InvalidArgumentError(
            "price process must be a PriceProcess keyed by mask value", field="price_process"
        )
    expected = set(range(1, mask_cardinality + 1))
    if set(price_process.keys) != expected:
        raise InvalidArgumentError(
            f"price process keys {sorted(price_process.keys)} do not match mask values 1..{mask_cardinality}",
            field="price_process",
        )
    if price_process.H > H:
        raise InvalidArgumentError(f"price cap {price_process.H} exceeds H={H}", field="price_process")


def make_finite_env(
    items: Sequence,
    values: Sequence[float],
    probs: Sequence[float],
    mask_map: Sequence[int],
    price_process: Optional[PriceProcess] = None,
    H: float = 1.0,
    n: Optional[int] = None,
    name: str = "",
) -> EnvModel:
    """
    Build a finite-support environment.

    Args:
        items: Item labels; item i is referred to by its position
        values: v*(x) per item, in [0, H]
        probs: P(x) per item, summing to 1 within 1e-12
        mask_map: Mask index in [1..n] per item
        price_process: Price process keyed by mask index, or None to attach later
        H: Value and price cap
        n: Mask cardinality (defaults to max(mask_map))
        name: Optional label

    Returns:
        Validated EnvModel

    Raises:
        InvalidArgumentError: Naming the first field that fails validation
    """
    values_arr = np.asarray(values, dtype=float)
    probs_arr = np.asarray(probs, dtype=float)
    mask_arr = np.asarray(mask_map, dtype=int)
    count = len(items)

    if H <= 0:
        raise InvalidArgumentError("H must be positive", field="H")
    if count == 0:
        raise InvalidArgumentError("at least one item is required", field="items")
    if values_arr.shape != (count,):
        raise InvalidArgumentError(f"expected {count} values", field="values")
    if np.any(values_arr < 0) or np.any(values_arr > H):
        raise InvalidArgumentError(f"values must lie in [0, {H}]", field="values")
    if probs_arr.shape != (count,):
        raise InvalidArgumentError(f"expected {count} probabilities", field="probs")
    if np.any(probs_arr < 0) or abs(probs_arr.sum() - 1.0) > PROB_TOLERANCE:
        raise InvalidArgumentError("probabilities must be nonnegative and sum to 1", field="probs")
    if mask_arr.shape != (count,):
        raise InvalidArgumentError(f"expected {count} mask indices", field="mask_map")

    n = int(n) if n is not None else int(mask_arr.max())
    if np.any(mask_arr < 1) or np.any(mask_arr > n):
        raise InvalidArgumentError(f"mask indices must lie in [1, {n}]", field="mask_map")

    for arr in (values_arr, probs_arr, mask_arr):
        arr.setflags(write=False)

    env = EnvModel(
        item_model=FiniteItemModel(values_table=values_arr, probs=probs_arr),
        mask=FiniteMask(mask_map=mask_arr, n=n),
        price_process=None,
        H=float(H),
        name=name,
    )
    if price_process is not None:
        env = env.with_prices(price_process)
    return env


def _mass_points(density: Density, seed: int, n_mass_samples: int) -> np.ndarray:
    return density.sample(np.random.default_rng([seed, 0xC0FFEE]), n_mass_samples)


def pattern_masses(separators: Separators, points: np.ndarray) -> Dict[int, float]:
    """Share of ``points`` landing on each price key 1..2**ell."""
    ell = separators.ell
    keys = 1 + simhash_batch(separators, points).astype(np.int64) @ (1 << np.arange(ell, dtype=np.int64))
    counts = np.bincount(keys, minlength=(1 << ell) + 1)
    return {key: float(counts[key]) / len(points) for key in range(1, (1 << ell) + 1)}


def generate_separators(
    d: int,
    ell: int,
    density: Density,
    seed: int,
    min_mass: float = 0.01,
    min_pattern_mass: float = 0.001,
    n_mass_samples: int = 10_000,
    set_attempts: int = 100,
) -> Separators:
    """
    Draw SimHash separators whose hyperplanes cut the unit box.

    Each row is sampled on the unit sphere and redrawn (up to 100 times)
    while its hyperplane through the origin misses the box interior or
    leaves less than ``min_mass`` of the density on one side. Whole
    candidate sets are then drawn until every one of the 2**ell patterns
    carries at least ``min_pattern_mass``; when no candidate gets there
    (in d=2 at most ell+1 patterns fit in the box) the candidate realizing
    the most patterns is kept.
    """
    if d < 2:
        raise InvalidArgumentError("a hyperplane through the origin cannot cut [0,1]^1; need d >= 2", field="d")
    if ell < 1:
        raise InvalidArgumentError("ell must be at least 1", field="ell")

    mass_points = _mass_points(density, seed, n_mass_samples)

    @retry_attempts(max_attempts=100, exceptions=(NoMassError,))
    def draw_row(stream: int, attempt: int = 0) -> np.ndarray:
        row = np.random.default_rng([seed, stream, attempt]).normal(size=d)
        row /= np.linalg.norm(row)
        if np.all(row >= 0.0) or np.all(row <= 0.0):
            raise NoMassError("separator hyperplane misses the box interior")
        positive = float((mass_points @ row >= 0.0).mean())
        if min(positive, 1.0 - positive) < min_mass:
            raise NoMassError(f"a separator leaves less than {min_mass:.0%} mass on one side")
        return row

    full = 1 << ell
    best: Optional[Separators] = None
    best_count = -1
    for candidate in range(set_attempts):
        separators = Separators(np.vstack([draw_row(stream=candidate * ell + j) for j in range(ell)]))
        count = sum(m >= min_pattern_mass for m in pattern_masses(separators, mass_points).values())
        if count > best_count:
            best, best_count = separators, count
        if count == full:
            break

    if best_count < full:
        logger.warning(f"Separators realize {best_count} of {full} sign patterns in the box (d={d}, ell={ell})")
    return best


def advertised_keys(
    separators: Separators,
    density: Density,
    seed: int,
    min_pattern_mass: float = 0.001,
    n_mass_samples: int = 10_000,
) -> Tuple[int, ...]:
    """Price keys whose pattern carries at least ``min_pattern_mass`` of the density."""
    masses = pattern_masses(separators, _mass_points(density, seed, n_mass_samples))
    return tuple(key for key, mass in masses.items() if mass >= min_pattern_mass)


def make_simhash_env(
    d: int,
    ell: int,
    density: Density,
    valuation: Valuation,
    separator_seed: int,
    price_process: Optional[PriceProcess] = None,
    H: float = 1.0,
    name: str = "",
) -> EnvModel:
    """
    Build a SimHash environment over [0,1]^d.

    Args:
        d: Item dimension
        ell: Number of SimHash bits
        density: Item density (uniform or truncated Gaussian)
        valuation: Nonnegative concave valuation
        separator_seed: Seed for the hidden separators
        price_process: Price process over keys 1..2**ell, or None to attach later
        H: Value and price cap
        name: Optional label

    Returns:
        Validated EnvModel
    """
    if density.d != d:
        raise InvalidArgumentError(f"density dimension {density.d} does not match d={d}", field="density")
    if valuation.H > H:
        raise InvalidArgumentError("valuation cap exceeds H", field="valuation")

    separators = generate_separators(d, ell, density, separator_seed)
    realized = advertised_keys(separators, density, separator_seed)
    logger.info(f"Generated SimHash separators: d={d}, ell={ell}, seed={separator_seed}, patterns={len(realized)}")

    env = EnvModel(
        item_model=ContinuousItemModel(density=density, valuation=valuation),
        mask=SimHashMask(separators=separators, realized_keys=realized),
        price_process=None,
        H=float(H),
        name=name,
    )
    if price_process is not None:
        env = env.with_prices(price_process)
    return env
