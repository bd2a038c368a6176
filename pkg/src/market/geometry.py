"""
SimHash geometry.

Separators, sign patterns, the convex regions they cut out of the unit box,
linear-feasibility separator recovery and Monte-Carlo region means.
"""

import logging
from dataclasses import dataclass
from typing import Any, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from ..utils.errors import InvalidArgumentError, NoMassError, RealizabilityError

logger = logging.getLogger(__name__)

SignPattern = Tuple[int, ...]

# Below this many accepted samples an estimate is flagged as low-mass.
LOW_MASS_ACCEPTED = 50


@dataclass(frozen=True)
class Separators:
    """Rows w_1..w_ell of the SimHash matrix, shape (ell, d)."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float, ndmin=2)
        if w.ndim != 2 or w.size == 0:
            raise InvalidArgumentError("separators must be a non-empty (ell, d) matrix", field="w")
        if np.any(np.linalg.norm(w, axis=1) == 0.0):
            raise InvalidArgumentError("separator rows must be nonzero", field="w")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def ell(self) -> int:
        return int(self.w.shape[0])

    @property
    def d(self) -> int:
        return int(self.w.shape[1])

    def to_list(self):
        return self.w.tolist()


def simhash_batch(sep: Separators, X: np.ndarray) -> np.ndarray:
    """Sign patterns for a batch of points; bit j is 1 iff w_j . x >= 0."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != sep.d:
        raise InvalidArgumentError(f"point dimension {X.shape[1]} does not match separators d={sep.d}", field="x")
    return (X @ sep.w.T >= 0.0).astype(np.int8)


def simhash(sep: Separators, x: Sequence[float]) -> SignPattern:
    """
    SimHash sign pattern of a single point.

    Args:
        sep: Separators
        x: Point in [0,1]^d

    Returns:
        Tuple of ell bits
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != sep.d:
        raise InvalidArgumentError(f"point dimension {x.shape} does not match separators d={sep.d}", field="x")
    return tuple(int(b) for b in simhash_batch(sep, x[None, :])[0])


@dataclass(frozen=True)
class PolytopeRegion:
    """
    Intersection of the unit box with halfspaces.

    Constraint k reads ``normals[k] . x + offsets[k] >= 0`` when ``bits[k]``
    is 1 and ``< 0`` when it is 0, matching the SimHash sign convention.
    """

    normals: np.ndarray
    offsets: np.ndarray
    bits: np.ndarray

    @classmethod
    def from_pattern(cls, sep: Separators, pattern: Sequence[int]) -> "PolytopeRegion":
        bits = np.asarray(pattern, dtype=np.int8)
        if bits.shape != (sep.ell,):
            raise InvalidArgumentError(f"pattern needs exactly {sep.ell} bits", field="pattern")
        return cls(normals=sep.w, offsets=np.zeros(sep.ell), bits=bits)

    @classmethod
    def whole_box(cls, d: int) -> "PolytopeRegion":
        return cls(normals=np.zeros((0, d)), offsets=np.zeros(0), bits=np.zeros(0, dtype=np.int8))

    @property
    def d(self) -> int:
        return int(self.normals.shape[1])

    def contains(self, X: np.ndarray) -> np.ndarray:
        """Exact membership for a batch of points."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        in_box = np.all((X >= 0.0) & (X <= 1.0), axis=1)
        if self.normals.shape[0] == 0:
            return in_box
        side = (X @ self.normals.T + self.offsets) >= 0.0
        return in_box & np.all(side == self.bits.astype(bool), axis=1)


def recover_separators(points: np.ndarray, patterns: np.ndarray) -> Separators:
    """
    Recover separators consistent with labelled training points.

    For each bit j, solves the feasibility LP ``sigma_i (w_j . x_i) >= 1``
    with ``sigma_i = +1`` when the bit is set and -1 otherwise.

    Args:
        points: Training points, shape (m, d)
        patterns: Observed sign patterns, shape (m, ell)

    Returns:
        Separators whose SimHash reproduces every training pattern

    Raises:
        RealizabilityError: If some bit admits no consistent halfspace
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    Y = np.atleast_2d(np.asarray(patterns, dtype=int))
    if X.shape[0] != Y.shape[0] or X.shape[0] == 0:
        raise InvalidArgumentError("need one pattern per point and at least one point", field="samples")

    m, d = X.shape
    ell = Y.shape[1]
    rows = []

    for j in range(ell):
        sigma = np.where(Y[:, j] == 1, 1.0, -1.0)
        # linprog wants A_ub @ w <= b_ub
        result = linprog(
            c=np.zeros(d),
            A_ub=-(sigma[:, None] * X),
            b_ub=-np.ones(m),
            bounds=[(None, None)] * d,
            method="highs",
        )
        if result.status != 0 or result.x is None:
            raise RealizabilityError(f"no halfspace separates the samples for bit {j}: {result.message}")
        w_j = np.asarray(result.x, dtype=float)
        if not np.any(w_j):
            raise RealizabilityError(f"recovered a zero separator for bit {j}")
        rows.append(w_j)

    recovered = Separators(np.vstack(rows))
    if not np.array_equal(simhash_batch(recovered, X), Y.astype(np.int8)):
        raise RealizabilityError("recovered separators disagree with the training patterns")

    logger.info(f"Recovered {ell} separators from {m} samples in d={d}")
    return recovered


@dataclass(frozen=True)
class RegionEstimate:
    """Monte-Carlo conditional mean over a region."""

    estimate: float
    std_error: float
    accepted: int
    n_samples: int
    low_mass: bool
    value_variance: float

    @property
    def mass(self) -> float:
        return self.accepted / self.n_samples


def estimate_region_mean(
    env: Any,
    region: PolytopeRegion,
    n_samples: int = 50_000,
    seed: Optional[int] = None,
    n_bootstrap: int = 200,
) -> RegionEstimate:
    """
    Estimate E[v*(x) | x in region] by rejection sampling from the item density.

    Args:
        env: EnvModel or ContinuousItemModel providing ``sample`` and ``values``
        region: Region to condition on
        n_samples: Number of density draws
        seed: Seed for the draws and the bootstrap
        n_bootstrap: Bootstrap resamples for the standard error

    Returns:
        RegionEstimate; ``low_mass`` is set when fewer than 50 draws land inside

    Raises:
        NoMassError: If no draw lands inside the region
    """
    model = getattr(env, "item_model", env)
    if n_samples < 1:
        raise InvalidArgumentError("n_samples must be positive", field="n_samples")

    rng = np.random.default_rng(seed)
    X = model.sample(rng, n_samples)
    inside = region.contains(X)
    accepted = int(inside.sum())
    if accepted == 0:
        raise NoMassError(f"no sample out of {n_samples} landed in the region")

    values = model.values(X[inside])
    estimate = float(values.mean())

    boot = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        boot[b] = values[rng.integers(0, accepted, size=accepted)].mean()
    std_error = float(boot.std(ddof=1)) if n_bootstrap > 1 else 0.0

    low_mass = accepted < LOW_MASS_ACCEPTED
    if low_mass:
        logger.warning(f"Low-mass region: {accepted}/{n_samples} samples accepted")

    return RegionEstimate(
        estimate=estimate,
        std_error=std_error,
        accepted=accepted,
        n_samples=n_samples,
        low_mass=low_mass,
        value_variance=float(values.var()),
    )
