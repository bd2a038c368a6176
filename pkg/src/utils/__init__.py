"""
Utility modules for maskbuy.

Provides structured logging and the error hierarchy.
"""

from .logger import get_logger, log_run_event, setup_logger
from .errors import (
    ConfigError,
    ContractViolationError,
    DegenerateHorizonError,
    InsufficientDataError,
    InvalidArgumentError,
    MaskbuyError,
    NoMassError,
    NumericalError,
    PhaseViolationError,
    ProtocolViolationError,
    RealizabilityError,
    retry_attempts,
)

__all__ = [
    # Logger
    "get_logger",
    "log_run_event",
    "setup_logger",
    # Errors
    "ConfigError",
    "ContractViolationError",
    "DegenerateHorizonError",
    "InsufficientDataError",
    "InvalidArgumentError",
    "MaskbuyError",
    "NoMassError",
    "NumericalError",
    "PhaseViolationError",
    "ProtocolViolationError",
    "RealizabilityError",
    "retry_attempts",
]
