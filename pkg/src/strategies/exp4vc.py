"""
Exp4.VC over threshold policies.

The buyer explores uniformly for tau rounds, builds a finite grid of
per-mask thresholds from the prices it saw, then runs exponential weights
over every threshold vector in the grid. Policy weights factor over
(mask index, price bucket) cells, so the mixture probability is computed in
O(n + sum m_i) per round from per-cell log-domain accumulators instead of by
enumerating the grid. ``NaivePolicyWeights`` keeps the enumeration as a
reference.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from ..market.types import BuyerKnowledge, BuyerStrategy, Item, MaskValue, mask_key
from ..utils.errors import (
    DegenerateHorizonError,
    InvalidArgumentError,
    NumericalError,
    ProtocolViolationError,
)

logger = logging.getLogger(__name__)

MAX_NAIVE_POLICIES = 10**6
DEBUG_ROUNDS = 100


def init_length(T: int, n: int, delta: float) -> int:
    """
    Length of the uniform exploration phase.

    ceil(sqrt(T n ln(eT/n) + ln(2/delta))), capped at floor(T/2).

    Raises:
        InvalidArgumentError: If delta is outside (0, 1) or T < n
        DegenerateHorizonError: If the cap leaves no exploration round
    """
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError("delta must lie in (0, 1)", field="delta")
    if n < 1 or T < n:
        raise InvalidArgumentError(f"need T >= n >= 1, got T={T}, n={n}", field="T")

    raw = math.sqrt(T * n * math.log(math.e * T / n) + math.log(2.0 / delta))
    tau = min(math.ceil(raw), T // 2)
    if tau < 1:
        raise DegenerateHorizonError(f"horizon T={T} leaves no initialization phase", field="T")
    return tau


def exp4vc_gamma(log_grid_size: float, remaining: int) -> float:
    """Exploration floor gamma, kept inside (0, 1/4]."""
    return min(math.sqrt(max(log_grid_size, math.log(2.0)) / (2.0 * remaining)), 0.25)


def exp4vc_bonus(log_grid_size: float, remaining: int, delta: float) -> float:
    """Confidence bonus sqrt(ln(|V|/delta) / (2 (T - tau)))."""
    return math.sqrt((log_grid_size + math.log(1.0 / delta)) / (2.0 * remaining))


@dataclass(frozen=True)
class PolicyGrid:
    """Per mask index i, the sorted thresholds V_i = {0 = p_i0 < p_i1 < ...}."""

    thresholds: Tuple[np.ndarray, ...]
    H: float = 1.0

    @property
    def n(self) -> int:
        return len(self.thresholds)

    @property
    def sizes(self) -> np.ndarray:
        """|V_i| = m_i + 1 per index."""
        return np.array([v.shape[0] for v in self.thresholds], dtype=int)

    @property
    def m(self) -> int:
        return int(self.sizes.max()) - 1

    @property
    def log_grid_size(self) -> float:
        return float(np.log(self.sizes).sum())


def build_policy_grid(init_observations: Sequence[Tuple[int, float]], n: int, H: float = 1.0) -> PolicyGrid:
    """
    V_i = {0} together with every price seen under mask index i.

    Args:
        init_observations: (mask index in 1..n, price) pairs from the initialization phase
        n: Number of mask indices
        H: Price cap

    Returns:
        PolicyGrid with sorted, deduplicated thresholds
    """
    seen: List[List[float]] = [[0.0] for _ in range(n)]
    for i, p in init_observations:
        if not 1 <= i <= n:
            raise InvalidArgumentError(f"mask index {i} outside [1, {n}]", field="mask")
        if not 0.0 <= p <= H:
            raise InvalidArgumentError(f"price {p} outside [0, {H}]", field="price")
        seen[i - 1].append(float(p))

    thresholds = []
    for values in seen:
        arr = np.unique(np.asarray(values, dtype=float))
        arr.setflags(write=False)
        thresholds.append(arr)
    return PolicyGrid(thresholds=tuple(thresholds), H=float(H))


def locate_bucket(grid: PolicyGrid, i: int, price: float) -> int:
    """
    Bucket of ``price`` for index i: 0 when the price is 0, otherwise the j
    with price in (p_{i,j-1}, p_{i,j}], where thresholds past m_i equal H.
    """
    return int(np.searchsorted(grid.thresholds[i - 1], price, side="left"))


@dataclass(frozen=True)
class MixtureProbs:
    """Mixture probabilities (no purchase, purchase) and the work it took."""

    xi_bar: Tuple[float, float]
    ops: int = 0


class BucketAccumulators:
    """
    Log-domain exponents G[i][j][b] for every index i, bucket j in
    0..m_i+1 and arm b, stored flat.

    The log-weight of the policy that uses threshold V_i[k] for index i is
    sum_{j<=k} G[i][j][1] + sum_{j>k} G[i][j][0] summed over i.
    """

    def __init__(self, grid: PolicyGrid):
        self.grid = grid
        self.bucket_counts = grid.sizes + 1
        self.starts = np.concatenate(([0], np.cumsum(self.bucket_counts)[:-1])).astype(int)
        self.G = np.zeros((int(self.bucket_counts.sum()), 2))
        # accumulator cells (i, j) read and written so far
        self.reads = 0
        self.writes = 0

        local = np.arange(self.G.shape[0]) - np.repeat(self.starts, self.bucket_counts)
        self._policy_mask = local < np.repeat(self.bucket_counts - 1, self.bucket_counts)
        self.policy_starts = self.starts - np.arange(grid.n)

    def cell(self, i: int, j: int) -> np.ndarray:
        """View of (G[i][j][0], G[i][j][1])."""
        return self.G[self.starts[i - 1] + j]

    def log_policy_weights(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Per-index log-weights log g_i(k) for k in 0..m_i, flat, and the
        per-index log partition L_i = log sum_k g_i(k).
        """
        self.reads += int(self.G.shape[0])
        counts = self.bucket_counts
        G0 = self.G[:, 0]
        G1 = self.G[:, 1]

        c0 = np.cumsum(G0)
        c1 = np.cumsum(G1)
        prefix0 = c0 - np.repeat(c0[self.starts] - G0[self.starts], counts)
        prefix1 = c1 - np.repeat(c1[self.starts] - G1[self.starts], counts)
        total0 = np.repeat(np.add.reduceat(G0, self.starts), counts)

        log_g = (prefix1 + total0 - prefix0)[self._policy_mask]

        sizes = self.grid.sizes
        peak = np.maximum.reduceat(log_g, self.policy_starts)
        scaled = np.exp(log_g - np.repeat(peak, sizes))
        log_partition = peak + np.log(np.add.reduceat(scaled, self.policy_starts))
        return log_g, log_partition

    def policy_log_weight(self, ks: Sequence[int]) -> float:
        """Log-weight of the policy choosing threshold index ks[i-1] for each index i."""
        log_g, _ = self.log_policy_weights()
        return float(sum(log_g[self.policy_starts[i] + k] for i, k in enumerate(ks)))


def _lse(values: np.ndarray) -> float:
    if values.size == 0:
        return -math.inf
    return float(logsumexp(values))


def _mix(ratio0: float, ratio1: float, gamma: float, ops: int) -> MixtureProbs:
    xi0 = (1.0 - 2.0 * gamma) * ratio0 + gamma
    xi1 = (1.0 - 2.0 * gamma) * ratio1 + gamma
    if not (math.isfinite(xi0) and math.isfinite(xi1)) or abs(xi0 + xi1 - 1.0) > 1e-9:
        raise NumericalError(f"mixture probabilities ({xi0}, {xi1}) are not a distribution")
    return MixtureProbs(xi_bar=(xi0, xi1), ops=ops)


def mixture_probs(
    grid: PolicyGrid,
    acc: BucketAccumulators,
    context: Tuple[int, int],
    gamma: float,
) -> MixtureProbs:
    """
    Probability of each arm under the gamma-smoothed policy mixture.

    Policies buy in bucket j of index i exactly when their index-i threshold
    position k satisfies k >= j; every other index factors out of the ratio.

    Args:
        grid: Policy grid
        acc: Accumulators for the grid
        context: (mask index i, bucket j)
        gamma: Exploration floor in (0, 1/2)

    Returns:
        MixtureProbs with each component in [gamma, 1 - gamma]
    """
    if not 0.0 < gamma < 0.5:
        raise InvalidArgumentError("gamma must lie in (0, 1/2)", field="gamma")
    i, j = context
    reads_before = acc.reads

    log_g, log_partition = acc.log_policy_weights()
    log_total = float(log_partition.sum())
    if not math.isfinite(log_total):
        raise NumericalError("policy weights overflowed")

    start = acc.policy_starts[i - 1]
    segment = log_g[start : start + grid.sizes[i - 1]]
    others = log_total - log_partition[i - 1]

    ratio1 = math.exp(_lse(segment[j:]) + others - log_total)
    ratio0 = math.exp(_lse(segment[:j]) + others - log_total)

    return _mix(ratio0, ratio1, gamma, ops=acc.reads - reads_before)


def update_accumulators(
    acc: BucketAccumulators,
    context: Tuple[int, int],
    arm: int,
    reward: float,
    probs: MixtureProbs,
    gamma: float,
    bonus: float,
) -> BucketAccumulators:
    """
    Add f_b = (gamma/2) (r_hat[b] + bonus / xi[b]) to G[i][j][b] for the
    round's single (i, j) cell.

    ``r_hat`` is the importance-weighted estimate r * 1[b = arm] / xi[arm].
    """
    xi = probs.xi_bar
    if xi[arm] < gamma - 1e-12:
        raise NumericalError(f"mixture floor violated: xi[{arm}]={xi[arm]} < gamma={gamma}")

    r_hat = [0.0, 0.0]
    r_hat[arm] = reward / xi[arm]
    i, j = context
    cell = acc.cell(i, j)
    cell[0] += 0.5 * gamma * (r_hat[0] + bonus / xi[0])
    cell[1] += 0.5 * gamma * (r_hat[1] + bonus / xi[1])
    acc.writes += 1
    return acc


class NaivePolicyWeights:
    """Explicit log-weights for every threshold vector in a grid (test scale only)."""

    def __init__(self, grid: PolicyGrid, max_policies: int = MAX_NAIVE_POLICIES):
        count = int(np.prod(grid.sizes))
        if count > max_policies:
            raise InvalidArgumentError(f"grid has {count} policies, above {max_policies}", field="grid")
        self.grid = grid
        self.positions = np.array(list(itertools.product(*[range(s) for s in grid.sizes])), dtype=int)
        self.thresholds = np.array(list(itertools.product(*grid.thresholds)), dtype=float)
        self.log_w = np.zeros(count)

    def advice(self, i: int, price: float) -> np.ndarray:
        return (self.thresholds[:, i - 1] >= price).astype(int)


def naive_mixture_probs(
    grid: PolicyGrid,
    weights: NaivePolicyWeights,
    context: Tuple[int, float],
    gamma: float,
) -> MixtureProbs:
    """Mixture probabilities by enumerating every policy; context is (mask index, price)."""
    i, price = context
    advice = weights.advice(i, price).astype(bool)
    log_total = _lse(weights.log_w)
    ratio1 = math.exp(_lse(weights.log_w[advice]) - log_total)
    ratio0 = math.exp(_lse(weights.log_w[~advice]) - log_total)
    return _mix(ratio0, ratio1, gamma, ops=int(weights.log_w.size))


def naive_update(
    weights: NaivePolicyWeights,
    context: Tuple[int, float],
    arm: int,
    reward: float,
    probs: MixtureProbs,
    gamma: float,
    bonus: float,
) -> NaivePolicyWeights:
    """Policy-by-policy weight update w_v <- w_v exp(C_v)."""
    i, price = context
    xi = np.asarray(probs.xi_bar)
    r_hat = np.zeros(2)
    r_hat[arm] = reward / xi[arm]
    advice = weights.advice(i, price)
    weights.log_w += 0.5 * gamma * (r_hat[advice] + bonus / xi[advice])
    return weights


class Exp4VC(BuyerStrategy):
    """Exp4.VC buyer with bucketized weight updates."""

    name = "exp4vc"

    def __init__(self, delta: float = 0.05, debug_path: Optional[Union[str, Path]] = None):
        super().__init__()
        if not 0.0 < delta < 1.0:
            raise InvalidArgumentError("delta must lie in (0, 1)", field="delta")
        self.delta = delta
        self.debug_path = Path(debug_path) if debug_path else None
        self.t = 0
        self.tau = 0
        self.grid: Optional[PolicyGrid] = None
        self.acc: Optional[BucketAccumulators] = None
        self.gamma = 0.0
        self.bonus = 0.0
        self._init_observations: List[Tuple[int, float]] = []
        self._pending: Optional[Tuple[int, int, int, MixtureProbs]] = None
        self._debug_rounds = 0

    def bind(self, knowledge: BuyerKnowledge, rng: np.random.Generator) -> None:
        super().bind(knowledge, rng)
        self.tau = init_length(knowledge.horizon, knowledge.mask_cardinality, self.delta)
        logger.debug(f"Exp4.VC: T={knowledge.horizon}, n={knowledge.mask_cardinality}, tau={self.tau}")

    @property
    def horizon(self) -> int:
        return self.knowledge.horizon

    def decide(self, mask: MaskValue, price: float) -> int:
        self.t += 1
        if self.t > self.horizon:
            raise ProtocolViolationError(f"round {self.t} past horizon {self.horizon}")

        i = mask_key(mask)
        if self.t <= self.tau:
            self._init_observations.append((i, price))
            self._pending = None
            return int(self.rng.random() < 0.5)

        j = locate_bucket(self.grid, i, price)
        probs = mixture_probs(self.grid, self.acc, (i, j), self.gamma)
        arm = int(self.rng.random() < probs.xi_bar[1])
        self._pending = (i, j, arm, probs)
        return arm

    def feedback(self, item: Optional[Item], utility: float) -> None:
        if self._pending is None:
            if self.t == self.tau:
                self._build_grid()
            return

        i, j, arm, probs = self._pending
        H = self.knowledge.H
        # arm 0 has true reward 0, which maps to 1/2
        reward = (utility + H) / (2.0 * H) if arm == 1 else 0.5
        update_accumulators(self.acc, (i, j), arm, reward, probs, self.gamma, self.bonus)
        self._pending = None

        if self.debug_path is not None:
            self._debug_round(i, j, arm, reward, utility, probs)
            if self.t == self.horizon:
                self._debug_write({"event": "accumulators", "G": self.acc.G.tolist()})

    def _build_grid(self) -> None:
        n = self.knowledge.mask_cardinality
        self.grid = build_policy_grid(self._init_observations, n, self.knowledge.H)
        self.acc = BucketAccumulators(self.grid)
        remaining = self.horizon - self.tau
        self.gamma = exp4vc_gamma(self.grid.log_grid_size, remaining)
        self.bonus = exp4vc_bonus(self.grid.log_grid_size, remaining, self.delta)
        logger.debug(
            f"Exp4.VC grid built: ln|V|={self.grid.log_grid_size:.3f}, m={self.grid.m}, "
            f"gamma={self.gamma:.4f}, bonus={self.bonus:.4f}"
        )
        if self.debug_path is not None:
            self._debug_write(
                {
                    "event": "grid",
                    "tau": self.tau,
                    "gamma": self.gamma,
                    "bonus": self.bonus,
                    "thresholds": [v.tolist() for v in self.grid.thresholds],
                }
            )

    def _debug_round(self, i: int, j: int, arm: int, reward: float, utility: float, probs: MixtureProbs) -> None:
        if self._debug_rounds >= DEBUG_ROUNDS:
            return
        self._debug_rounds += 1
        xi0, xi1 = probs.xi_bar
        standard = [reward / xi0 if arm == 0 else 0.0, reward / xi1 if arm == 1 else 0.0]
        # estimate as literally written: (b u / xi[1], 0)
        literal = [arm * utility / xi1, 0.0]
        self._debug_write(
            {
                "event": "round",
                "round": self.t,
                "mask": i,
                "bucket": j,
                "arm": arm,
                "xi_bar": [xi0, xi1],
                "r_hat_standard": standard,
                "r_hat_literal": literal,
            }
        )

    def _debug_write(self, payload: Dict) -> None:
        self.debug_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.debug_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(payload) + "\n")


# ---------------------------------------------------------------------------
# Threshold-policy combinatorics


def threshold_policy_decision(v: Sequence[float], mask: int, price: float) -> int:
    """Threshold policy: buy iff v[mask] >= price (mask is 1-based)."""
    return int(v[mask - 1] >= price)


def _per_index_grids(thresholds_grid, n: int) -> List[Sequence[float]]:
    if len(thresholds_grid) and np.isscalar(thresholds_grid[0]):
        return [thresholds_grid] * n
    return list(thresholds_grid)


def realized_labelings(
    contexts: Sequence[Tuple[int, float]],
    thresholds_grid,
    n: Optional[int] = None,
) -> Set[Tuple[int, ...]]:
    """
    Distinct decision vectors that threshold policies drawn from a grid
    produce on a list of (mask index, price) contexts.

    Args:
        contexts: (mask index, price) pairs
        thresholds_grid: Candidate thresholds, either one list shared by all
            indices or one list per index
        n: Number of mask indices (defaults to the largest index in contexts)

    Returns:
        Set of labelings, each a tuple of 0/1 in context order
    """
    if n is None:
        n = max((i for i, _ in contexts), default=1)
    grids = _per_index_grids(thresholds_grid, n)
    if len(grids) < n:
        raise InvalidArgumentError(f"need thresholds for {n} indices", field="thresholds_grid")

    # decisions factor over indices, so combine per-index sub-labelings
    positions: Dict[int, List[int]] = {}
    for pos, (i, _) in enumerate(contexts):
        if not 1 <= i <= n:
            raise InvalidArgumentError(f"mask index {i} outside [1, {n}]", field="contexts")
        positions.setdefault(i, []).append(pos)

    blocks = []
    for i, pos_list in sorted(positions.items()):
        prices = np.array([contexts[p][1] for p in pos_list])
        grid = np.asarray(grids[i - 1], dtype=float)
        labels = {tuple((grid_value >= prices).astype(int)) for grid_value in grid}
        blocks.append((pos_list, labels))

    result: Set[Tuple[int, ...]] = set()
    for combo in itertools.product(*[labels for _, labels in blocks]):
        vector = [0] * len(contexts)
        for (pos_list, _), sub in zip(blocks, combo):
            for p, bit in zip(pos_list, sub):
                vector[p] = bit
        result.add(tuple(vector))
    return result


def is_shattered(contexts: Sequence[Tuple[int, float]], thresholds_grid, n: Optional[int] = None) -> bool:
    """True when every 0/1 labelling of the contexts is realized."""
    return len(realized_labelings(contexts, thresholds_grid, n)) == 2 ** len(contexts)
