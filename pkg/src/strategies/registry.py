"""
Strategy registry and parameter models.

Maps strategy ids to factories that build a fresh strategy for a given
horizon, and validates experiment-config parameters against each
strategy's pydantic model.
"""

import logging
from dataclasses import dataclass
from typing import Annotated, Any, Callable, Dict, List, Literal, Mapping, Optional, Tuple, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..market.environments import EnvModel
from ..market.oracle import ConditionalValueTable, conditional_value_table
from ..market.types import BuyerStrategy
from ..utils.errors import InvalidArgumentError
from .baselines import AlwaysBuy, FixedThreshold, NeverBuy, OracleStrategy, RandomBuy
from .etc_finite import ETCFinite
from .etc_simhash import ETCSimHash
from .exp4vc import Exp4VC

logger = logging.getLogger(__name__)

StrategyFactory = Callable[[int], BuyerStrategy]

Probability = Annotated[float, Field(gt=0.0, lt=1.0)]
Positive = Annotated[float, Field(gt=0.0)]


class StrategyParams(BaseModel):
    """Base for strategy parameter models: unknown keys and NaN are rejected."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class NoParams(StrategyParams):
    pass


class Exp4VCParams(StrategyParams):
    delta: Probability = 0.05
    debug_path: Optional[str] = None


class ETCFiniteParams(StrategyParams):
    c: Positive = 0.05
    schedule: Literal["unknown-eta", "known-eta"] = "unknown-eta"
    # read from the env's oracle table when unset
    eta_min: Optional[Annotated[float, Field(gt=0.0, le=1.0)]] = None


class ETCSimHashParams(StrategyParams):
    c: Positive = 1.0
    delta: Probability = 0.05
    n_samples: int = Field(default=50_000, ge=1)
    n_bootstrap: int = Field(default=200, ge=1)
    debug_path: Optional[str] = None


class DoublingParams(ETCSimHashParams):
    T0: int = Field(ge=2)


class RandomBuyParams(StrategyParams):
    prob: Annotated[float, Field(ge=0.0, le=1.0)] = 0.5


class FixedThresholdParams(StrategyParams):
    thresholds: Optional[Dict[int, float]] = None
    default: float = 0.0


@dataclass(frozen=True)
class StrategySpec:
    """Registry entry: builder, parameter model and the env families it runs on."""

    builder: Callable[..., StrategyFactory]
    params: Type[StrategyParams]
    description: str = ""
    families: Tuple[str, ...] = ()


def _without(params: Mapping[str, Any], *names: str) -> Dict[str, Any]:
    return {k: v for k, v in params.items() if k not in names}


def _exp4vc(params: Mapping[str, Any], env: EnvModel, table: Optional[ConditionalValueTable]) -> StrategyFactory:
    return lambda horizon: Exp4VC(**params)


def _etc_finite(params: Mapping[str, Any], env: EnvModel, table: Optional[ConditionalValueTable]) -> StrategyFactory:
    params = dict(params)
    if params.get("schedule") == "known-eta" and params.get("eta_min") is None:
        params["eta_min"] = (table or conditional_value_table(env)).eta_min
        logger.info(f"known-eta schedule uses eta_min={params['eta_min']:.6g} from the environment")
    return lambda horizon: ETCFinite(**params)


def _etc_simhash(params: Mapping[str, Any], env: EnvModel, table: Optional[ConditionalValueTable]) -> StrategyFactory:
    params = _without(params, "T0")
    return lambda horizon: ETCSimHash(**params)


def _oracle(params: Mapping[str, Any], env: EnvModel, table: Optional[ConditionalValueTable]) -> StrategyFactory:
    table = table or conditional_value_table(env)
    return lambda horizon: OracleStrategy(table)


def _simple(cls) -> Callable[..., StrategyFactory]:
    def build(params: Mapping[str, Any], env: EnvModel, table: Optional[ConditionalValueTable]) -> StrategyFactory:
        return lambda horizon: cls(**params)

    return build


def _error_field(error: ValidationError) -> str:
    first = error.errors()[0]
    loc = ".".join(str(part) for part in first["loc"])
    return f"strategy.params.{loc}" if loc else "strategy.params"


class StrategyRegistry:
    """Registry of available strategies."""

    def __init__(self):
        self.strategies: Dict[str, StrategySpec] = {}
        self._register_default_strategies()

    def _register_default_strategies(self):
        self.register(
            "exp4vc",
            StrategySpec(
                _exp4vc,
                Exp4VCParams,
                "Exp4.VC over threshold policies with bucketized weights (finite masks)",
                ("finite",),
            ),
        )
        self.register(
            "etc-finite",
            StrategySpec(
                _etc_finite, ETCFiniteParams, "Explore-then-commit on frequency estimates (finite masks)", ("finite",)
            ),
        )
        self.register(
            "etc-simhash",
            StrategySpec(
                _etc_simhash,
                ETCSimHashParams,
                "Explore-then-commit with separator recovery (SimHash masks, known density)",
                ("simhash",),
            ),
        )
        self.register(
            "etc-simhash-doubling",
            StrategySpec(
                _etc_simhash, DoublingParams, "ETC-SimHash over doubling epochs for an unknown horizon", ("simhash",)
            ),
        )
        self.register("oracle", StrategySpec(_oracle, NoParams, "Myopic comparator with the true conditional values"))
        self.register("always-buy", StrategySpec(_simple(AlwaysBuy), NoParams, "Buys every round"))
        self.register("never-buy", StrategySpec(_simple(NeverBuy), NoParams, "Never buys"))
        self.register("random-buy", StrategySpec(_simple(RandomBuy), RandomBuyParams, "Buys with a fixed probability"))
        self.register(
            "fixed-threshold",
            StrategySpec(
                _simple(FixedThreshold), FixedThresholdParams, "Buys iff the per-mask threshold is at least the price"
            ),
        )

    def register(self, strategy_id: str, spec: StrategySpec):
        """Register a strategy under ``strategy_id``."""
        self.strategies[strategy_id] = spec
        logger.debug(f"Registered strategy: {strategy_id}")

    def get(self, strategy_id: str) -> StrategySpec:
        if strategy_id not in self.strategies:
            raise InvalidArgumentError(
                f"unknown strategy {strategy_id!r}; expected one of {sorted(self.strategies)}", field="strategy.id"
            )
        return self.strategies[strategy_id]

    def get_schema(self, strategy_id: str) -> Dict:
        """JSON schema of the strategy's parameters."""
        return self.get(strategy_id).params.model_json_schema()

    def list(self) -> List[str]:
        return sorted(self.strategies)

    def validate_params(self, strategy_id: str, params: Mapping[str, Any]) -> Dict[str, Any]:
        """
        Validate parameters against the strategy's model.

        Returns:
            The parameters with defaults filled in; unset optional entries are omitted

        Raises:
            InvalidArgumentError: Unknown strategy, unknown or missing parameter, or invalid value
        """
        model = self.get(strategy_id).params
        try:
            validated = model.model_validate(dict(params))
        except ValidationError as e:
            first = e.errors()[0]
            raise InvalidArgumentError(
                f"invalid parameters for strategy {strategy_id}: {first['msg']}", field=_error_field(e)
            ) from e
        return validated.model_dump(exclude_none=True)

    def check_family(self, strategy_id: str, env: EnvModel) -> None:
        families = self.get(strategy_id).families
        if families and env.family not in families:
            raise InvalidArgumentError(
                f"strategy {strategy_id} does not run on {env.family} environments", field="strategy.id"
            )


_registry: Optional[StrategyRegistry] = None


def get_registry() -> StrategyRegistry:
    """Get the global strategy registry."""
    global _registry
    if _registry is None:
        _registry = StrategyRegistry()
    return _registry


def build_factory(
    strategy_id: str,
    params: Mapping[str, Any],
    env: EnvModel,
    table: Optional[ConditionalValueTable] = None,
) -> StrategyFactory:
    """
    Factory building a fresh strategy for a horizon.

    Args:
        strategy_id: Registered strategy id
        params: Strategy parameters
        env: Environment the strategy will run on
        table: Oracle table, used by the oracle and the known-eta schedule

    Returns:
        Callable taking the horizon and returning an unbound strategy
    """
    registry = get_registry()
    registry.check_family(strategy_id, env)
    params = registry.validate_params(strategy_id, params)
    return registry.get(strategy_id).builder(params, env, table)


def is_doubling(strategy_id: str) -> bool:
    """Whether the strategy runs through the doubling runner."""
    return strategy_id == "etc-simhash-doubling"
