"""
Regret series aggregation and log-log exponent fits.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Union

import numpy as np
import pandas as pd
from scipy import stats

from ..utils.errors import InsufficientDataError, InvalidArgumentError

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 4
RESULT_COLUMNS = ["T", "seed", "run_id", "final_regret"]
SUMMARY_COLUMNS = ["T", "mean_regret", "stderr", "replicates"]


@dataclass
class RegretSeries:
    """Final cumulative regret per (T, seed), with per-T aggregates."""

    results: pd.DataFrame

    @classmethod
    def from_rows(cls, rows: Iterable[Mapping]) -> "RegretSeries":
        frame = pd.DataFrame(list(rows), columns=RESULT_COLUMNS)
        if frame.duplicated(["T", "seed"]).any():
            raise InvalidArgumentError("one row per (T, seed) pair expected", field="results")
        frame = frame.sort_values(["T", "seed"], kind="mergesort").reset_index(drop=True)
        return cls(results=frame)

    @property
    def summary(self) -> pd.DataFrame:
        return summarize(self.results)


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard error of final regret per horizon."""
    rows: List[Dict] = []
    for T, group in results.groupby("T", sort=True):
        values = np.sort(group["final_regret"].to_numpy(dtype=float))
        count = values.size
        mean = float(np.mean(values))
        stderr = float(np.std(values, ddof=1) / np.sqrt(count)) if count > 1 else 0.0
        rows.append({"T": int(T), "mean_regret": mean, "stderr": stderr, "replicates": count})
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    excluded: int

    def to_dict(self) -> Dict[str, float]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_points": self.n_points,
            "excluded": self.excluded,
        }


def fit_regret_exponent(series: Union[RegretSeries, pd.DataFrame]) -> FitResult:
    """
    Ordinary least squares on (ln T, ln mean_regret).

    Horizons with mean regret <= 0 are excluded and counted.

    Args:
        series: RegretSeries, or a summary frame with T and mean_regret columns

    Returns:
        FitResult with slope, intercept and r^2

    Raises:
        InsufficientDataError: If fewer than 4 usable points remain
    """
    summary = series.summary if isinstance(series, RegretSeries) else series
    T = summary["T"].to_numpy(dtype=float)
    mean = summary["mean_regret"].to_numpy(dtype=float)

    usable = mean > 0
    excluded = int((~usable).sum())
    if excluded:
        logger.warning(f"Excluded {excluded} horizon(s) with non-positive mean regret from the fit")
    if usable.sum() < MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"need at least {MIN_FIT_POINTS} horizons with positive mean regret, got {int(usable.sum())}"
        )

    fit = stats.linregress(np.log(T[usable]), np.log(mean[usable]))
    return FitResult(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue**2),
        n_points=int(usable.sum()),
        excluded=excluded,
    )


def read_summary(path: Union[str, Path]) -> pd.DataFrame:
    """Read a summary CSV written by the harness."""
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in ("T", "mean_regret") if c not in frame.columns]
    if missing:
        raise InvalidArgumentError(f"summary is missing columns {missing}", field="summary")
    return frame


def write_regret_curve(summary: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Gnuplot-friendly two-column file: T mean_regret."""
    path = Path(path)
    lines = ["# T mean_regret"]
    lines += [f"{int(T)} {float(m)!r}" for T, m in zip(summary["T"], summary["mean_regret"])]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_fit(fit: FitResult, path: Union[str, Path]) -> Path:
    """Fitted line parameters, one ``key value`` pair per line."""
    path = Path(path)
    lines = [f"{key} {value!r}" for key, value in fit.to_dict().items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
