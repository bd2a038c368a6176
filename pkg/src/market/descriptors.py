"""Environment descriptors: JSON-serializable environment configs."""

import json
import logging
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from ..utils.errors import InvalidArgumentError
from .environments import (
    CoordinateMeanValuation,
    CoordinateValuation,
    Density,
    EnvModel,
    LinearClippedValuation,
    TruncatedGaussianDensity,
    UniformBoxDensity,
    Valuation,
    make_finite_env,
    make_simhash_env,
)
from .oracle import DEFAULT_ORACLE_SAMPLES, DEFAULT_ORACLE_SEED, conditional_value_table
from .pricing import (
    DiscretePrice,
    PointPrice,
    PriceDistribution,
    PriceProcess,
    UniformPrice,
    adversarial_price_process,
    stochastic_price_process,
)

logger = logging.getLogger(__name__)


class PriceDistributionSpec(BaseModel):
    """One per-mask price distribution."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["uniform", "point", "discrete"]
    low: float = 0.0
    high: float = 1.0
    value: Optional[float] = None
    values: Optional[List[float]] = None
    probs: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_kind_fields(self):
        if self.kind == "point" and self.value is None:
            raise ValueError("point prices need 'value'")
        if self.kind == "discrete" and (self.values is None or self.probs is None):
            raise ValueError("discrete prices need 'values' and 'probs'")
        return self

    def build(self) -> PriceDistribution:
        if self.kind == "uniform":
            return UniformPrice(self.low, self.high)
        if self.kind == "point":
            return PointPrice(self.value)
        return DiscretePrice(self.values, self.probs)


class StochasticPriceSpec(BaseModel):
    """I.i.d. prices; ``per_mask`` overrides ``default`` for listed mask keys."""

    model_config = ConfigDict(extra="forbid")

    type: Literal["stochastic"] = "stochastic"
    default: Optional[PriceDistributionSpec] = None
    per_mask: Dict[int, PriceDistributionSpec] = Field(default_factory=dict)


class AdversarialPriceSpec(BaseModel):
    """Oblivious adversarial price table."""

    model_config = ConfigDict(extra="forbid")

    type: Literal["adversarial"] = "adversarial"
    generator: Literal["threshold-sweep", "periodic-spike", "near-oracle"]
    seed: int = 0
    params: Dict[str, Union[int, float]] = Field(default_factory=dict)


PriceSpec = Annotated[Union[StochasticPriceSpec, AdversarialPriceSpec], Field(discriminator="type")]


class FiniteEnvSpec(BaseModel):
    """Finite item table with an explicit mask map."""

    model_config = ConfigDict(extra="forbid")

    family: Literal["finite"] = "finite"
    name: str = ""
    items: Optional[List[str]] = None
    values: List[float]
    probs: List[float]
    mask_map: List[int]
    n: Optional[int] = None
    H: float = 1.0
    prices: PriceSpec


class DensitySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["uniform", "truncated-gaussian"] = "uniform"
    mean: Optional[List[float]] = None
    std: Optional[List[float]] = None


class ValuationSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["linear-clipped", "coordinate-mean", "coordinate"] = "coordinate-mean"
    weights: Optional[List[float]] = None
    intercept: float = 0.0
    index: int = 0


class SimHashEnvSpec(BaseModel):
    """Continuous items on [0,1]^d masked by a hidden SimHash."""

    model_config = ConfigDict(extra="forbid")

    family: Literal["simhash"] = "simhash"
    name: str = ""
    d: int = Field(ge=1)
    ell: int = Field(ge=1)
    density: DensitySpec = Field(default_factory=DensitySpec)
    valuation: ValuationSpec = Field(default_factory=ValuationSpec)
    separator_seed: int = 0
    H: float = 1.0
    prices: PriceSpec


EnvDescriptor = Annotated[Union[FiniteEnvSpec, SimHashEnvSpec], Field(discriminator="family")]

_ENV_ADAPTER: TypeAdapter = TypeAdapter(EnvDescriptor)


def parse_env_descriptor(data: Union[str, Dict]) -> Union[FiniteEnvSpec, SimHashEnvSpec]:
    """Validate a descriptor from a JSON string or a dict."""
    if isinstance(data, str):
        return _ENV_ADAPTER.validate_json(data)
    return _ENV_ADAPTER.validate_python(data)


def load_env_descriptor(path: Path) -> Union[FiniteEnvSpec, SimHashEnvSpec]:
    """Load a descriptor from a JSON file."""
    return parse_env_descriptor(Path(path).read_text(encoding="utf-8"))


def dump_env_descriptor(descriptor: Union[FiniteEnvSpec, SimHashEnvSpec]) -> str:
    """Serialize a descriptor to JSON."""
    return json.dumps(descriptor.model_dump(mode="json"), indent=2, sort_keys=True)


def _build_density(spec: DensitySpec, d: int) -> Density:
    if spec.kind == "uniform":
        return UniformBoxDensity(d)
    mean = spec.mean if spec.mean is not None else [0.5] * d
    std = spec.std if spec.std is not None else [0.25] * d
    return TruncatedGaussianDensity(mean, std)


def _build_valuation(spec: ValuationSpec, d: int, H: float) -> Valuation:
    if spec.kind == "linear-clipped":
        weights = spec.weights if spec.weights is not None else [1.0 / d] * d
        return LinearClippedValuation(weights, spec.intercept, H)
    if spec.kind == "coordinate":
        return CoordinateValuation(spec.index, H)
    return CoordinateMeanValuation(H)


def _build_prices(spec, env: EnvModel, horizon: Optional[int], oracle_samples: int, oracle_seed: int) -> PriceProcess:
    keys = range(1, env.mask_cardinality + 1)

    if isinstance(spec, StochasticPriceSpec):
        distributions = {}
        for key in keys:
            dist_spec = spec.per_mask.get(key, spec.default)
            if dist_spec is None:
                raise InvalidArgumentError(f"no price distribution for mask {key} and no default given", field="prices")
            distributions[key] = dist_spec.build()
        return stochastic_price_process(distributions, H=env.H)

    if horizon is None:
        raise InvalidArgumentError("adversarial prices need the run horizon", field="horizon")

    cond_values = None
    if spec.generator in ("threshold-sweep", "near-oracle"):
        cond_values = conditional_value_table(env, oracle_samples, oracle_seed).cond_values

    return adversarial_price_process(
        spec.generator,
        T=horizon,
        mask_cardinality=env.mask_cardinality,
        seed=spec.seed,
        H=env.H,
        cond_values=cond_values,
        **spec.params,
    )


def build_env(
    descriptor: Union[FiniteEnvSpec, SimHashEnvSpec],
    horizon: Optional[int] = None,
    oracle_samples: int = DEFAULT_ORACLE_SAMPLES,
    oracle_seed: int = DEFAULT_ORACLE_SEED,
) -> EnvModel:
    """
    Construct an EnvModel from a descriptor.

    The item model and mask are built first; adversarial generators that
    centre on conditional values then read the oracle table before the
    price table is materialized.

    Args:
        descriptor: Validated environment descriptor
        horizon: Run length (required for adversarial prices)
        oracle_samples: Monte-Carlo samples for continuous oracle tables
        oracle_seed: Oracle seed

    Returns:
        EnvModel with prices attached
    """
    if isinstance(descriptor, FiniteEnvSpec):
        items = descriptor.items or [f"item-{i}" for i in range(len(descriptor.values))]
        env = make_finite_env(
            items=items,
            values=descriptor.values,
            probs=descriptor.probs,
            mask_map=descriptor.mask_map,
            H=descriptor.H,
            n=descriptor.n,
            name=descriptor.name,
        )
    else:
        env = make_simhash_env(
            d=descriptor.d,
            ell=descriptor.ell,
            density=_build_density(descriptor.density, descriptor.d),
            valuation=_build_valuation(descriptor.valuation, descriptor.d, descriptor.H),
            separator_seed=descriptor.separator_seed,
            H=descriptor.H,
            name=descriptor.name,
        )

    prices = _build_prices(descriptor.prices, env, horizon, oracle_samples, oracle_seed)
    return env.with_prices(prices)
