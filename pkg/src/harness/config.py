"""
Experiment configuration.

Experiment configs are JSON documents; unset fields fall back to the
harness defaults in ``config/harness.yaml``.
"""

import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..market.descriptors import EnvDescriptor
from ..strategies.registry import get_registry
from ..utils.errors import ConfigError, InvalidArgumentError

logger = logging.getLogger(__name__)

DEFAULTS_FILE = Path(__file__).resolve().parents[2] / "config" / "harness.yaml"

BUILTIN_DEFAULTS: Dict[str, Any] = {
    "horizons": [2000, 5000, 12000, 30000, 75000],
    "replicates": 50,
    "oracle_samples": 200_000,
    "oracle_seed": 20_240_601,
    "strategies": {},
}


@lru_cache(maxsize=None)
def _read_defaults(path: str) -> Dict[str, Any]:
    defaults = dict(BUILTIN_DEFAULTS)
    file = Path(path)
    if not file.exists():
        logger.warning(f"Harness defaults not found at {file}, using built-in values")
        return defaults
    with open(file, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    defaults.update(data)
    return defaults


def load_harness_defaults(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Harness defaults (horizon grid, replicates, oracle and schedule settings)."""
    return _read_defaults(str(path or DEFAULTS_FILE))


class StrategyConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    params: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("id")
    @classmethod
    def _known_id(cls, value: str) -> str:
        get_registry().get(value)
        return value


class ExperimentConfig(BaseModel):
    """A validated experiment: environment, strategy, horizon grid and replicates."""

    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    env: EnvDescriptor
    strategy: StrategyConfig
    horizons: Optional[List[int]] = None
    replicates: Optional[int] = None
    seed_base: int = 0
    oracle_samples: Optional[int] = None
    oracle_seed: Optional[int] = None
    write_rounds: bool = True
    output: Optional[str] = None

    @field_validator("horizons")
    @classmethod
    def _increasing(cls, value: Optional[List[int]]) -> Optional[List[int]]:
        if value is None:
            return value
        if not value:
            raise ValueError("horizon grid must not be empty")
        if value[0] < 1:
            raise ValueError("horizons must be positive")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("horizon grid must be strictly increasing")
        return value

    @field_validator("replicates")
    @classmethod
    def _positive_replicates(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError("replicates must be at least 1")
        return value

    @model_validator(mode="after")
    def _strategy_params(self) -> "ExperimentConfig":
        get_registry().validate_params(self.strategy.id, self.strategy.params)
        return self

    def with_defaults(self, defaults: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        """Copy with unset fields and strategy parameters taken from the harness defaults."""
        defaults = defaults or load_harness_defaults()
        update: Dict[str, Any] = {}
        for key in ("horizons", "replicates", "oracle_samples", "oracle_seed"):
            if getattr(self, key) is None:
                update[key] = defaults[key]

        strategy_defaults = (defaults.get("strategies") or {}).get(self.strategy.id, {})
        params = {**strategy_defaults, **self.strategy.params}
        params = get_registry().validate_params(self.strategy.id, params)
        update["strategy"] = StrategyConfig(id=self.strategy.id, params=params)
        return self.model_copy(update=update)


def parse_experiment_config(data: Union[str, Dict[str, Any]]) -> ExperimentConfig:
    """
    Validate a config from a JSON string or dict and fill in defaults.

    Raises:
        ConfigError: With field-level detail on any schema violation
    """
    try:
        if isinstance(data, str):
            data = json.loads(data)
        config = ExperimentConfig.model_validate(data)
        return config.with_defaults()
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    except ValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid experiment config: {details}") from e
    except InvalidArgumentError as e:
        raise ConfigError(f"invalid experiment config: {e}") from e


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """Load and validate an experiment config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    config = parse_experiment_config(path.read_text(encoding="utf-8"))
    logger.info(f"Loaded experiment config {config.name} from {path}")
    return config
