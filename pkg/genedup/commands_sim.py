"""Stochastic commands: simulate, sde, theorem1, psub-scan.

Replicates and paths draw from generators derived from (seed, run, index),
and rows are written in replicate order, so rerunning a manifest's config
reproduces the CSV bytes.
"""

import logging
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from . import lineage, moran, sde, subfunc, wright_fisher
from .analytics import mean_ci
from .errors import ConfigError, SimulationInstabilityError
from .outcomes import Outcome, tally
from .report_builder import ReportWriter
from .schemas import ExperimentConfig, SdeRun, SubfuncParams, WattersonParams

logger = logging.getLogger(__name__)

DEFAULT_CAP_FACTOR = 100.0


def _writer(config: ExperimentConfig) -> ReportWriter:
    return ReportWriter(config.out, config.model_dump(), config.seed)


def _lineage_summary(b: float, reps: int, seed: int) -> Dict[str, Any]:
    """Closed-form single-lineage P(S) next to its race Monte Carlo with mu_r = mu_c = b."""
    race = lineage.single_lineage_race_mc(b, b, reps=reps, seed=seed)
    return {
        "single_lineage_psub": lineage.single_lineage_psub(b, b),
        "single_lineage_race_estimate": race.estimate,
        "single_lineage_race_std_error": race.std_error,
        "single_lineage_race_lower": race.lower,
        "single_lineage_race_upper": race.upper,
    }


def _require_pop(config: ExperimentConfig) -> int:
    if config.pop_size is None:
        raise ConfigError(f"{config.command} --model {config.model} requires --pop-size", ["pop_size"])
    return config.pop_size


def default_start(config: ExperimentConfig) -> List[float]:
    """Symmetric point of the curve of equilibria."""
    if config.model == "watterson":
        root = config.mu**0.25
        return [root, root]
    return list(subfunc.symmetric_point(SubfuncParams(b=config.b)).as_state().as_array())


def _outcome_rows(results, seed: int):
    return [(r.replicate, seed, r.kind.value, r.time) for r in results]


def cmd_simulate(config: ExperimentConfig) -> Dict[str, Any]:
    """Absorption runs of the discrete model selected by `model`.

    Wright-Fisher for watterson (start from `start` as null frequencies,
    default none), Moran for subfunc (start all (3, 3)). The cap is
    `time_cap` generations or 100 N.
    """
    n_pop = _require_pop(config)
    cap = config.time_cap or DEFAULT_CAP_FACTOR * n_pop
    out = _writer(config)
    if config.model == "watterson":
        x, y = config.start or (0.0, 0.0)
        start = wright_fisher.WfPopulation(n_pop, int(round(2 * n_pop * x)), int(round(2 * n_pop * y)))
        results = wright_fisher.wf_replicates(start, WattersonParams(mu=config.mu), config.reps, int(cap), config.seed)
    else:
        results = moran.moran_replicates(
            moran.MoranPopulation.uniform(n_pop), SubfuncParams(b=config.b), config.reps, cap, config.seed
        )
    out.csv("replicates.csv", ["replicate", "seed", "outcome", "time"], _outcome_rows(results, config.seed))
    absorbed = [r.time for r in results if r.absorbed]
    mean, half = mean_ci(absorbed)
    summary: Dict[str, Any] = {
        "model": config.model,
        "pop_size": n_pop,
        "reps": config.reps,
        "outcomes": tally(results),
        "mean_time": mean,
        "mean_time_half_width": half,
        "mean_time_over_n": mean / n_pop,
    }
    if config.model == "subfunc":
        summary.update(_lineage_summary(config.b, config.reps, config.seed))
    out.summary(summary)
    out.finish()
    logger.info("simulate: %s", summary["outcomes"])
    return summary


def _sde_run(config: ExperimentConfig, start: List[float]) -> SdeRun:
    n_steps = max(1, int(round(config.horizon / config.dt)))
    try:
        return SdeRun(
            model=config.model,
            mu=config.mu if config.model == "watterson" else None,
            b=config.b if config.model == "subfunc" else None,
            n_pop=_require_pop(config),
            dt=config.dt,
            horizon=config.horizon,
            seed=config.seed,
            paths=config.paths,
            start=start,
            delta=config.delta,
            record_every=max(1, n_steps // config.grid),
        )
    except ValidationError as exc:
        fields = sorted({".".join(str(p) for p in e["loc"]) or "run" for e in exc.errors()})
        raise ConfigError(f"invalid SDE run: {exc.errors()[0]['msg']}", fields) from exc


def cmd_sde(config: ExperimentConfig) -> Dict[str, Any]:
    """Euler-Maruyama paths with per-path near-curve statistics.

    With `n_list` and the watterson model, the containment experiment is
    run over those sizes as well.
    """
    run = _sde_run(config, config.start or default_start(config))
    out = _writer(config)
    result = sde.integrate_sde(run)
    coords = ["x", "y"] if run.model == "watterson" else ["x3", "x2", "x1", "y3", "y2", "y1"]
    out.csv(
        "paths.csv",
        ["path", "time", *coords],
        [(k, t, *result.paths[k, j]) for k in range(run.paths) for j, t in enumerate(result.times)],
    )
    out.csv(
        "stats.csv",
        ["path", "sup_distance", "within_bound", "exited", "exit_time", "outcome", "error"],
        [
            (s.path, s.sup_distance, s.within_bound, s.exited, s.exit_time, s.outcome.value, s.error or "")
            for s in result.stats
        ],
    )
    failed = sum(s.error is not None for s in result.stats)
    summary: Dict[str, Any] = {
        "model": run.model,
        "pop_size": run.n_pop,
        "paths": run.paths,
        "steps": run.n_steps,
        "bound": 2.0 * run.n_pop ** (-run.delta),
        "containment_fraction": result.containment_fraction,
        "outcomes": {kind.value: sum(s.outcome is kind for s in result.stats) for kind in Outcome},
        "clamps": result.clamps,
        "failed_paths": failed,
    }
    if config.n_list and run.model == "watterson":
        rows = sde.containment_experiment(
            config.n_list, config.mu, config.delta, config.horizon, config.paths, config.seed, config.start
        )
        out.csv(
            "containment.csv",
            ["n_pop", "bound", "fraction", "paths", "absorbed"],
            [(r.n_pop, r.bound, r.fraction, r.paths, r.absorbed) for r in rows],
        )
        summary["containment"] = {str(r.n_pop): r.fraction for r in rows}
    out.summary(summary)
    out.finish()
    if failed == run.paths:
        raise SimulationInstabilityError("every path became unstable")
    return summary


def cmd_theorem1(config: ExperimentConfig) -> Dict[str, Any]:
    """E sup |Z - Z0|^2 against N^-1/2 over `n_list`."""
    if not config.n_list:
        raise ConfigError("theorem1 requires --n-list", ["n_list"])
    start = config.start or [0.5, 0.5]
    out = _writer(config)
    rows = sde.theorem1_experiment(
        config.n_list, start, config.mu, config.gamma, config.paths, config.n_steps, config.seed
    )
    out.csv(
        "theorem1.csv",
        ["n_pop", "horizon", "dt", "estimate", "half_width", "bound"],
        [(r.n_pop, r.horizon, r.dt, r.estimate, r.half_width, r.bound) for r in rows],
    )
    estimates = [r.estimate for r in rows]
    summary = {
        "mu": config.mu,
        "gamma": config.gamma,
        "start": start,
        "estimates": {str(r.n_pop): r.estimate for r in rows},
        "decreasing": bool(np.all(np.diff(estimates) < 0.0)),
        "largest_n_within_bound": bool(rows[-1].estimate <= rows[-1].bound),
    }
    out.summary(summary)
    out.finish()
    return summary


def cmd_psub_scan(config: ExperimentConfig) -> Dict[str, Any]:
    """P(S) for each N in `n_list` and the fit of log P(S) against N."""
    if not config.n_list:
        raise ConfigError("psub-scan requires --n-list", ["n_list"])
    p = SubfuncParams(b=config.b)
    cap_factor: Optional[float] = None
    if config.time_cap:
        cap_factor = config.time_cap / config.n_list[-1]
    out = _writer(config)
    scan = moran.psub_decay_scan(config.n_list, p, config.reps, config.seed, cap_factor or DEFAULT_CAP_FACTOR)
    out.csv(
        "psub.csv",
        ["n_pop", "reps", "subfunctionalized", "censored", "estimate", "lower", "upper", "upper_bound_only"],
        [
            (r.n_pop, r.reps, r.subfunctionalized, r.censored, r.estimate, r.lower, r.upper, r.upper_bound_only)
            for r in scan.rows
        ],
    )
    summary: Dict[str, Any] = {
        "b": p.b,
        **_lineage_summary(p.b, config.reps, config.seed),
        "estimates": {str(r.n_pop): r.estimate for r in scan.rows},
    }
    if scan.fit is not None:
        summary.update(slope=scan.fit.slope, intercept=scan.fit.intercept, r_squared=scan.fit.r_squared)
    out.summary(summary)
    out.finish()
    return summary
