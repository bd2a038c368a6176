"""
Theoretical regret rates and concentration radii.

Closed-form reference curves written next to fitted exponents and used by
the statistical tests.
"""

import math

from ..utils.errors import InvalidArgumentError


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError("delta must lie in (0, 1)", field="delta")


def exp4vc_regret_rate(T: int, n: int, delta: float) -> float:
    """sqrt(T (n ln T + ln 1/delta))."""
    _check_delta(delta)
    return math.sqrt(T * (n * math.log(T) + math.log(1.0 / delta)))


def etc_concentration_radius(H: float, n: int, beta: float, t_prime: int, delta: float) -> float:
    """Radius 25 H sqrt(ln(4n/delta) / (beta t')) of the conditional-value estimate."""
    _check_delta(delta)
    return 25.0 * H * math.sqrt(math.log(4 * n / delta) / (beta * t_prime))


def etc_min_beta(n: int, t_prime: int, delta: float) -> float:
    """Smallest admissible mass level 9 ln(4n/delta) / t'."""
    _check_delta(delta)
    return 9.0 * math.log(4 * n / delta) / t_prime


def etc_exploit_round_regret(H: float, n: int, beta: float, t_prime: int, delta: float) -> float:
    """Per-round exploitation regret H (25 sqrt(ln(4n/delta)/(beta t')) + beta n)."""
    _check_delta(delta)
    return H * (25.0 * math.sqrt(math.log(4 * n / delta) / (beta * t_prime)) + beta * n)


def etc_regret_bound_unknown(T: int, n: int, H: float = 1.0) -> float:
    """H T^(3/4) n^(1/2) ln(4nT), the rate with an unknown mask distribution."""
    return H * T**0.75 * math.sqrt(n) * math.log(4 * n * T)


def etc_regret_bound_known(T: int, n: int, eta_min: float, H: float = 1.0) -> float:
    """H T^(2/3) ln(4nT) / eta_min, the rate when the smallest mask mass is known."""
    if eta_min <= 0:
        raise InvalidArgumentError("eta_min must be positive", field="eta_min")
    return H * T ** (2.0 / 3.0) * math.log(4 * n * T) / eta_min


def pac_disagreement_bound(t_prime: int, d: int, ell: int, delta: float) -> float:
    """(ell/t') (d ln(2e t'/d) + ln(2 ell/delta)): mass where recovered and true SimHash differ."""
    _check_delta(delta)
    return (ell / t_prime) * (d * math.log(2 * math.e * t_prime / d) + math.log(2 * ell / delta))


def simhash_exploit_round_regret(H: float, t_prime: int, d: int, ell: int, delta: float) -> float:
    """(2 H ell / t') (d ln(2e t'/d) + ln(ell 2^(ell+2) / delta))."""
    _check_delta(delta)
    return (2 * H * ell / t_prime) * (
        d * math.log(2 * math.e * t_prime / d) + math.log(ell * 2 ** (ell + 2) / delta)
    )


def simhash_regret_rate(T: int, d: int, ell: int, delta: float) -> float:
    """sqrt(T d ell ln(T ell / delta))."""
    _check_delta(delta)
    return math.sqrt(T * d * ell * math.log(T * ell / delta))
