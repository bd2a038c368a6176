"""
Experiment execution.

Runs seeded replicate cells over a horizon grid, scores each run against the
myopic oracle and writes per-round, per-run and summary CSVs plus the
plot-ready curve and fit files.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..market.descriptors import build_env
from ..market.oracle import ConditionalValueTable, conditional_value_table, regret
from ..market.protocol import run_protocol
from ..market.types import Transcript
from ..strategies import bounds
from ..strategies.etc_finite import schedule_known_eta, schedule_unknown_eta
from ..strategies.etc_simhash import doubling_runner, exploration_length
from ..strategies.registry import build_factory, is_doubling
from ..utils.errors import ConfigError, InsufficientDataError
from ..utils.logger import log_run_event
from .config import ExperimentConfig
from .fitting import RegretSeries, fit_regret_exponent, write_fit, write_regret_curve
from .manifest import ManifestManager

logger = logging.getLogger(__name__)

ROUND_COLUMNS = [
    "run_id",
    "t",
    "mask",
    "price",
    "decision",
    "utility",
    "oracle_decision",
    "regret_contribution",
    "cum_regret",
]

# strategy attributes copied into the manifest when present
CELL_ATTRIBUTES = ("tau", "t_prime", "capped", "gamma", "no_mass_rounds", "estimations")


@dataclass
class CellResult:
    """Outcome of one (T, seed) run."""

    run_id: str
    T: int
    seed: int
    final_regret: float
    metadata: Dict[str, Any] = field(default_factory=dict)
    rounds: Optional[pd.DataFrame] = None


def run_id_for(T: int, seed: int) -> str:
    return f"T{T}-s{seed}"


def _mask_label(mask) -> Union[int, str]:
    if isinstance(mask, tuple):
        return "".join(str(int(b)) for b in mask)
    return int(mask)


def rounds_frame(run_id: str, transcript: Transcript, ledger) -> pd.DataFrame:
    """Per-round table for one run."""
    return pd.DataFrame(
        {
            "run_id": run_id,
            "t": [r.t for r in transcript.records],
            "mask": [_mask_label(r.mask) for r in transcript.records],
            "price": transcript.prices(),
            "decision": transcript.decisions(),
            "utility": transcript.utilities(),
            "oracle_decision": ledger.oracle_decisions,
            "regret_contribution": ledger.contributions,
            "cum_regret": ledger.cumulative,
        },
        columns=ROUND_COLUMNS,
    )


def run_cell(config_data: Dict[str, Any], T: int, seed: int) -> CellResult:
    """
    Run one replicate at horizon T.

    Takes the config as a plain dict so cells can be shipped to worker
    processes.
    """
    config = ExperimentConfig.model_validate(config_data)
    run_id = run_id_for(T, seed)
    strategy_id = config.strategy.id
    params = dict(config.strategy.params)

    env = build_env(config.env, horizon=T, oracle_samples=config.oracle_samples, oracle_seed=config.oracle_seed)
    table = conditional_value_table(env, config.oracle_samples, config.oracle_seed)
    factory = build_factory(strategy_id, params, env, table)

    metadata: Dict[str, Any] = {}
    if is_doubling(strategy_id):
        transcript = doubling_runner(params["T0"], factory, env, T, seed)
        metadata["epochs"] = list(transcript.epochs)
    else:
        strategy = factory(T)
        transcript = run_protocol(env, strategy, T, seed)
        for name in CELL_ATTRIBUTES:
            if hasattr(strategy, name):
                value = getattr(strategy, name)
                metadata[name] = value.item() if isinstance(value, np.generic) else value
        if metadata.get("capped"):
            log_run_event(
                logger,
                logging.WARNING,
                f"Exploration length capped at floor(T/2)={metadata['t_prime']}",
                run_id=run_id,
                strategy=strategy_id,
                horizon=T,
                seed=seed,
            )

    ledger = regret(transcript, env, table)
    rounds = rounds_frame(run_id, transcript, ledger) if config.write_rounds else None
    return CellResult(
        run_id=run_id,
        T=T,
        seed=seed,
        final_regret=ledger.total,
        metadata=metadata,
        rounds=rounds,
    )


def _etc_finite_terms(T: int, n: int, t_prime: int, H: float) -> Dict[str, float]:
    # the schedules fold the failure probability into ln(4nT), i.e. delta = 1/T
    if T < 2 or t_prime < 1:
        return {}
    delta = 1.0 / T
    beta = bounds.etc_min_beta(n, t_prime, delta)
    return {
        "t_prime": t_prime,
        "min_beta": beta,
        "exploit_round_regret": bounds.etc_exploit_round_regret(H, n, beta, t_prime, delta),
    }


def _simhash_terms(T: int, d: int, ell: int, H: float, params: Dict[str, Any]) -> Dict[str, float]:
    t_prime = exploration_length(T, d, ell, params["delta"], params["c"])
    if t_prime < 1:
        return {}
    return {
        "t_prime": t_prime,
        "pac_disagreement": bounds.pac_disagreement_bound(t_prime, d, ell, params["delta"]),
        "exploit_round_regret": bounds.simhash_exploit_round_regret(H, t_prime, d, ell, params["delta"]),
    }


def reference_rates(
    config: ExperimentConfig, table: Optional[ConditionalValueTable] = None
) -> Dict[str, Dict[str, float]]:
    """
    Theoretical reference terms for the configured strategy, keyed by str(T).

    Each entry has the regret ``rate`` and, for the explore-then-commit
    strategies, the known-horizon exploration length with its per-round
    exploitation regret bound. Baselines get no entries.

    Args:
        config: Validated config with defaults filled
        table: Oracle table for the config's env; built once when the
            known-eta schedule needs eta_min and none is given
    """
    env = config.env
    params = config.strategy.params
    sid = config.strategy.id
    if sid not in ("exp4vc", "etc-finite", "etc-simhash", "etc-simhash-doubling"):
        return {}

    eta_min: Optional[float] = None
    if sid == "etc-finite" and params.get("schedule") == "known-eta":
        eta_min = params.get("eta_min")
        if eta_min is None:
            if table is None:
                model = build_env(
                    env,
                    horizon=max(config.horizons),
                    oracle_samples=config.oracle_samples,
                    oracle_seed=config.oracle_seed,
                )
                table = conditional_value_table(model, config.oracle_samples, config.oracle_seed)
            eta_min = table.eta_min

    rates: Dict[str, Dict[str, float]] = {}
    for T in config.horizons:
        if sid == "exp4vc":
            entry = {"rate": bounds.exp4vc_regret_rate(T, env.n or max(env.mask_map), params["delta"])}
        elif sid == "etc-finite":
            n = env.n or max(env.mask_map)
            if eta_min is not None:
                entry = {"rate": bounds.etc_regret_bound_known(T, n, eta_min, env.H)}
                t_prime = schedule_known_eta(T, n, eta_min, params["c"])
            else:
                entry = {"rate": bounds.etc_regret_bound_unknown(T, n, env.H)}
                t_prime = schedule_unknown_eta(T, n, params["c"])
            entry.update(_etc_finite_terms(T, n, t_prime, env.H))
        else:
            entry = {"rate": bounds.simhash_regret_rate(T, env.d, env.ell, params["delta"])}
            entry.update(_simhash_terms(T, env.d, env.ell, env.H, params))
        rates[str(T)] = entry
    return rates


class ExperimentRunner:
    """Manages an experiment's lifecycle: cells, outputs and manifest."""

    def __init__(self, config: ExperimentConfig, out_dir: Path, parallelism: int = 1):
        self.config = config
        self.out_dir = Path(out_dir)
        self.parallelism = max(1, int(parallelism))
        self.manifest_manager = ManifestManager(self.out_dir)

    def cells(self) -> List[Tuple[int, int]]:
        """(T, seed) pairs in output order."""
        seeds = [self.config.seed_base + r for r in range(self.config.replicates)]
        return [(T, seed) for T in self.config.horizons for seed in seeds]

    def _results(self) -> Iterator[CellResult]:
        cells = self.cells()
        data = self.config.model_dump()
        horizons = [T for T, _ in cells]
        seeds = [s for _, s in cells]
        if self.parallelism == 1:
            for T, seed in cells:
                yield run_cell(data, T, seed)
            return
        with ProcessPoolExecutor(max_workers=self.parallelism) as executor:
            # map yields in submission order, so outputs do not depend on scheduling
            yield from executor.map(run_cell, [data] * len(cells), horizons, seeds)

    def run(self) -> RegretSeries:
        """
        Execute every cell and write the outputs.

        Returns:
            RegretSeries with one row per (T, seed)
        """
        config = self.config
        self.manifest_manager.create_manifest(
            config.name, config.model_dump(mode="json"), reference_rates=reference_rates(config)
        )
        self.manifest_manager.update_status("running")
        logger.info(
            f"Experiment {config.name}: strategy={config.strategy.id}, horizons={config.horizons}, "
            f"replicates={config.replicates}, parallelism={self.parallelism}"
        )

        try:
            series = self._execute()
        except Exception as e:
            logger.error(f"Experiment {config.name} failed: {e}")
            self.manifest_manager.update_status("failed", error=f"{type(e).__name__}: {e}")
            raise

        self.manifest_manager.update_status("completed")
        logger.info(f"Experiment {config.name} completed")
        return series

    def _execute(self) -> RegretSeries:
        rounds_path = self.out_dir / "rounds.csv"
        if rounds_path.exists():
            rounds_path.unlink()

        rows: List[Dict[str, Any]] = []
        cell_meta: List[Dict[str, Any]] = []
        header = True
        for result in self._results():
            rows.append(
                {"T": result.T, "seed": result.seed, "run_id": result.run_id, "final_regret": result.final_regret}
            )
            cell_meta.append({"run_id": result.run_id, "T": result.T, "seed": result.seed, **result.metadata})
            if result.rounds is not None:
                result.rounds.to_csv(rounds_path, mode="a", header=header, index=False)
                header = False
            log_run_event(
                logger,
                logging.INFO,
                f"Cell done: regret={result.final_regret:.4f}",
                run_id=result.run_id,
                strategy=self.config.strategy.id,
                horizon=result.T,
                seed=result.seed,
            )

        self.manifest_manager.add_cells(cell_meta)
        series = RegretSeries.from_rows(rows)
        outputs = self._write_outputs(series)
        if rounds_path.exists():
            outputs.insert(0, rounds_path.name)
        for name in outputs:
            self.manifest_manager.add_output(name)
        return series

    def _write_outputs(self, series: RegretSeries) -> List[str]:
        summary = series.summary
        series.results.to_csv(self.out_dir / "results.csv", index=False)
        summary.to_csv(self.out_dir / "summary.csv", index=False)
        write_regret_curve(summary, self.out_dir / "regret_curve.dat")
        outputs = ["results.csv", "summary.csv", "regret_curve.dat"]

        try:
            fit = fit_regret_exponent(summary)
        except InsufficientDataError as e:
            logger.warning(f"No exponent fit: {e}")
            self.manifest_manager.set_fit(None, error=f"{e.error_code}: {e}")
            return outputs

        write_fit(fit, self.out_dir / "fit.txt")
        self.manifest_manager.set_fit(fit.to_dict())
        logger.info(f"Fitted regret exponent {fit.slope:.3f} (r^2={fit.r_squared:.3f})")
        return outputs + ["fit.txt"]


def run_experiment(
    config: ExperimentConfig,
    out_dir: Optional[Union[str, Path]] = None,
    parallelism: int = 1,
    seed_base: Optional[int] = None,
) -> RegretSeries:
    """
    Run an experiment and write its CSV outputs.

    Args:
        config: Validated config with defaults filled
        out_dir: Output directory (defaults to ``config.output``)
        parallelism: Worker processes for the (T, seed) cells
        seed_base: Overrides ``config.seed_base``

    Returns:
        RegretSeries with one row per (T, seed)
    """
    if seed_base is not None:
        config = config.model_copy(update={"seed_base": seed_base})
    target = out_dir or config.output
    if target is None:
        raise ConfigError("no output directory given")
    return ExperimentRunner(config, Path(target), parallelism).run()
