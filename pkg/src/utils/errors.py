"""
Error types and retry helpers for maskbuy.

Every error carries a stable ``error_code`` that shows up in structured logs
and in CLI messages.
"""

import logging
from functools import wraps
from typing import Any, Callable, Optional, Tuple, Type, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


class MaskbuyError(Exception):
    """Base class for all maskbuy errors."""

    error_code = "internal-error"


class InvalidArgumentError(MaskbuyError, ValueError):
    """Raised when an input violates a documented precondition."""

    error_code = "invalid-argument"

    def __init__(self, message: str, field: Optional[str] = None):
        """
        Initialize the error.

        Args:
            message: Human readable description
            field: Name of the offending field, when there is one
        """
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class ConfigError(MaskbuyError):
    """Raised when an experiment config cannot be loaded or validated."""

    error_code = "config-error"


class ContractViolationError(MaskbuyError):
    """A strategy broke the buyer interface contract."""

    error_code = "contract-violation"


class ProtocolViolationError(MaskbuyError):
    """A strategy was driven outside its horizon."""

    error_code = "protocol-violation"


class PhaseViolationError(MaskbuyError):
    """An explore-phase operation was called during exploitation (or vice versa)."""

    error_code = "phase-violation"


class DegenerateHorizonError(InvalidArgumentError):
    """The horizon leaves no room for an initialization or exploitation phase."""

    error_code = "degenerate-horizon"


class NoMassError(MaskbuyError):
    """A mask value or region has zero (estimated) probability mass."""

    error_code = "no-mass"


class RealizabilityError(MaskbuyError):
    """Separator recovery found no consistent halfspace; the data is not realizable."""

    error_code = "realizability-violation"


class NumericalError(MaskbuyError):
    """An internal numerical invariant failed (overflow, probability floor)."""

    error_code = "internal-error"


class InsufficientDataError(MaskbuyError):
    """Too few usable points for a fit."""

    error_code = "insufficient-data"


def retry_attempts(
    max_attempts: int = 100,
    exceptions: Tuple[Type[BaseException], ...] = (Exception,),
):
    """
    Decorator that re-invokes a function until it stops raising.

    The wrapped function receives the zero-based attempt number as the
    keyword argument ``attempt`` so it can derive fresh randomness per try.

    Args:
        max_attempts: Maximum number of calls
        exceptions: Exception types that trigger another attempt
    """

    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> T:
            last_exception: Optional[BaseException] = None

            for attempt in range(max_attempts):
                try:
                    return func(*args, attempt=attempt, **kwargs)
                except exceptions as e:
                    last_exception = e
                    logger.debug(
                        f"{func.__name__} attempt {attempt + 1}/{max_attempts} rejected: {e}"
                    )

            logger.error(f"{func.__name__} failed after {max_attempts} attempts")
            assert last_exception is not None
            raise last_exception

        return wrapper

    return decorator
