"""Euler-Maruyama and RK4 integration of the two diffusions.

The 2D diffusion of the double-recessive-null model has independent noise
sqrt(x(1-x)) dW per locus. The 6D subfunctionalization diffusion has, at
each locus, the multinomial covariance x_i (delta_ij - x_j) over the four
copy states; the two loci are unlinked. Both drifts are 2N times the
deterministic field.

Paths are simulated in lockstep as numpy batches, but every path draws its
normals from its own generator (see `outcomes.derive_rng`), so a path's
trajectory does not depend on how many other paths share the batch.
"""

import logging
from dataclasses import dataclass
from functools import partial
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import subfunc, watterson
from .analytics import mean_ci
from .diffusion1d import Diffusion1D, mean_exit_time
from .errors import ParameterError, SimulationInstabilityError
from .numerics import rk4_step
from .outcomes import Outcome, derive_rng
from .schemas import SdeRun, SubfuncParams, WattersonParams

logger = logging.getLogger(__name__)

Params = Union[WattersonParams, SubfuncParams]

CLAMP_TOL = 1e-12
DOMAIN_TOL = 1e-9
# Normals per drawn block, shared by all paths of a batch.
BLOCK_BUDGET = 1 << 21

_ABSORBED = (Outcome.GENE1_LOST, Outcome.GENE2_LOST, Outcome.SUBFUNCTIONALIZED)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class NearCurveStat:
    """Per-path summary of how far a path strayed from the curve of equilibria.

    `sup_distance` is sup |mu - X^2 Y^2| (2D) or sup |Z - Phi(Z)| (6D) up to
    min(tau, T); `exit_time` is that stopping time.
    """

    path: int
    sup_distance: float
    within_bound: bool
    exited: bool
    exit_time: float
    outcome: Outcome
    error: Optional[str] = None


@dataclass(frozen=True)
class SdeResult:
    run: SdeRun
    times: np.ndarray
    paths: np.ndarray
    stats: Tuple[NearCurveStat, ...]
    clamps: int

    @property
    def containment_fraction(self) -> float:
        ok = [s.within_bound for s in self.stats if s.error is None]
        return float(np.mean(ok)) if ok else float("nan")


@dataclass(frozen=True)
class Theorem1Row:
    n_pop: int
    horizon: float
    dt: float
    estimate: float
    half_width: float
    bound: float


@dataclass(frozen=True)
class ContainmentRow:
    n_pop: int
    bound: float
    fraction: float
    paths: int
    absorbed: int


@dataclass(frozen=True)
class ExitTimeEstimate:
    mean: float
    half_width: float
    paths: int
    censored: int
    dt: float

    @property
    def lower(self) -> float:
        return self.mean - self.half_width

    @property
    def upper(self) -> float:
        return self.mean + self.half_width

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def _model_of(params: Params) -> Tuple[str, Callable[[np.ndarray], np.ndarray]]:
    if isinstance(params, WattersonParams):
        return "watterson", partial(watterson.field_array, mu=params.mu)
    if isinstance(params, SubfuncParams):
        return "subfunc", partial(subfunc.field_array, b=params.b)
    raise ParameterError(f"unsupported parameter type {type(params).__name__}")


def sde_params(run: SdeRun) -> Params:
    if run.model == "watterson":
        return WattersonParams(mu=run.mu, n_pop=run.n_pop)
    return SubfuncParams(b=run.b, n_pop=run.n_pop)


def clamp_states(model: str, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Project rows onto the admissible set.

    Frequencies are clipped to [0, 1]; for the 6D model a locus whose mass
    exceeds 1 is rescaled proportionally.

    Returns:
        Tuple of (clamped states, per-row size of the correction).
    """
    clipped = np.clip(states, 0.0, 1.0)
    over = np.abs(clipped - states).max(axis=-1)
    if model == "subfunc":
        loci = clipped.reshape(-1, 2, 3)
        mass = loci.sum(axis=-1, keepdims=True)
        over = np.maximum(over, np.clip(mass - 1.0, 0.0, None).max(axis=(1, 2)))
        loci = np.where(mass > 1.0, loci / np.where(mass > 0.0, mass, 1.0), loci)
        clipped = loci.reshape(states.shape)
    return clipped, over


def noise_increment(model: str, states: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Noise per unit sqrt(time) for standard normals z.

    For the 6D model each locus uses sqrt(p) * z - p (sqrt(p) . z) over the
    four copy states, whose covariance is diag(p) - p p^T when sum(p) = 1;
    the state-0 component is dropped. z has 2 columns (2D) or 8 (6D).
    """
    if model == "watterson":
        return np.sqrt(np.clip(states * (1.0 - states), 0.0, None)) * z
    loci = states.reshape(-1, 2, 3)
    p = np.concatenate((loci, np.clip(1.0 - loci.sum(axis=-1, keepdims=True), 0.0, None)), axis=-1)
    root = np.sqrt(p)
    zz = z.reshape(-1, 2, 4)
    xi = root * zz - p * (root * zz).sum(axis=-1, keepdims=True)
    return xi[..., :3].reshape(states.shape)


def curve_distance(params: Params, states: np.ndarray) -> np.ndarray:
    """|mu - x^2 y^2| (2D) or the Euclidean distance to Phi(state) (6D).

    6D rows with x3 = 0 or y3 = 0 have no projection and get NaN.
    """
    if isinstance(params, WattersonParams):
        x, y = states[:, 0], states[:, 1]
        return np.abs(params.mu - (x * y) ** 2)
    out = np.full(states.shape[0], np.nan)
    x3, y3 = states[:, 0], states[:, 3]
    ok = (x3 > 0.0) & (y3 > 0.0)
    if np.any(ok):
        curve = subfunc.equilibrium_curve(params.b)
        u = curve.x3_of_ratio(y3[ok] / x3[ok])
        v = curve.y3(u)
        gx, gy = subfunc.curve_xy(u, v, params)
        proj = np.stack((u, gx, gx, v, gy, gy), axis=-1)
        out[ok] = np.linalg.norm(states[ok] - proj, axis=-1)
    return out


def classify_states(model: str, states: np.ndarray, n_pop: int) -> np.ndarray:
    """Index into (gene1-lost, gene2-lost, subfunctionalized) per row, or -1.

    Resolution is 1/(2N): a locus counts as lost when its functional mass
    (2D: 1 - null frequency) is at most 1/(2N).
    """
    eps = 1.0 / (2.0 * n_pop)
    code = np.full(states.shape[0], -1)
    if model == "watterson":
        code[states[:, 1] >= 1.0 - eps] = 1
        code[states[:, 0] >= 1.0 - eps] = 0
        return code
    x3, x2, x1, y3, y2, y1 = states.T
    subf = ((x2 >= 1.0 - eps) & (y1 >= 1.0 - eps)) | ((x1 >= 1.0 - eps) & (y2 >= 1.0 - eps))
    code[subf] = 2
    code[y3 + y2 + y1 <= eps] = 1
    code[x3 + x2 + x1 <= eps] = 0
    return code


def _check_start(model: str, start: np.ndarray) -> None:
    dim = 2 if model == "watterson" else 6
    if start.shape != (dim,):
        raise ParameterError(f"{model} start must have {dim} coordinates")
    if np.any(start < 0.0) or np.any(start > 1.0):
        raise ParameterError("start frequencies must lie in [0, 1]")
    if model == "subfunc" and (start[:3].sum() > 1.0 + CLAMP_TOL or start[3:].sum() > 1.0 + CLAMP_TOL):
        raise ParameterError("start frequencies at a locus sum to more than 1")


def integrate_ode(
    params: Params,
    start: Sequence[float],
    horizon: float,
    dt: float = 1e-2,
    speed: float = 1.0,
) -> Trajectory:
    """RK4 trajectory of speed * F from start over [0, horizon].

    States leaving the domain by more than DOMAIN_TOL are clamped back and
    reported in one warning.
    """
    model, field = _model_of(params)
    state = np.asarray(start, dtype=float)
    _check_start(model, state)
    if horizon <= 0.0 or dt <= 0.0:
        raise ParameterError("horizon and dt must be positive")
    n = max(1, int(round(horizon / dt)))
    h = horizon / n

    def scaled(y):
        return speed * field(y)

    states = np.empty((n + 1, state.size))
    states[0] = state
    clamped = 0
    for k in range(n):
        state = rk4_step(scaled, state, h)
        fixed, over = clamp_states(model, state[None, :])
        if over[0] > DOMAIN_TOL:
            clamped += 1
        state = fixed[0]
        states[k + 1] = state
    if clamped:
        logger.warning("ODE left the domain by more than %.0e at %d of %d steps; clamped", DOMAIN_TOL, clamped, n)
    return Trajectory(times=np.linspace(0.0, n * h, n + 1), states=states)


def integrate_sde(
    run: SdeRun,
    run_index: int = 0,
    keep_paths: bool = True,
    strict: bool = False,
) -> SdeResult:
    """Euler-Maruyama paths of the 2D or 6D diffusion.

    Args:
        run: Validated run settings.
        run_index: Separates the seed streams of runs sharing a seed.
        keep_paths: Record states every `run.record_every` steps; otherwise
            only the initial and final states are kept.
        strict: Raise on the first unstable path instead of recording it.

    Returns:
        SdeResult with recorded paths of shape (paths, records, dim) and one
        NearCurveStat per path.

    Raises:
        SimulationInstabilityError: Only with strict=True.
    """
    params = sde_params(run)
    model, field = _model_of(params)
    start = np.asarray(run.start, dtype=float)
    _check_start(model, start)
    n_paths, n_steps, dt = run.paths, run.n_steps, run.dt
    noise_dim = 2 if model == "watterson" else 8
    drift_rate = 2.0 * run.n_pop * run.drift_scale
    noise_amp = run.noise_scale * np.sqrt(dt)
    bound = 2.0 * run.n_pop ** (-run.delta)

    state = np.tile(start, (n_paths, 1))
    active = np.ones(n_paths, dtype=bool)
    exit_time = np.full(n_paths, n_steps * dt)
    codes = np.full(n_paths, -1)
    errors: List[Optional[str]] = [None] * n_paths
    sup = np.nan_to_num(curve_distance(params, state), nan=0.0)
    gens = [derive_rng(run.seed, run_index, k) for k in range(n_paths)]
    block = max(1, BLOCK_BUDGET // (n_paths * noise_dim))

    times, records = [0.0], [state.copy()]
    clamps = 0
    step = 0
    while step < n_steps:
        m = min(block, n_steps - step)
        noise = np.stack([g.standard_normal((m, noise_dim)) for g in gens], axis=1) if active.any() else None
        for j in range(m):
            step += 1
            idx = np.flatnonzero(active)
            if idx.size:
                cur = state[idx]
                new = cur + drift_rate * field(cur) * dt + noise_amp * noise_increment(model, cur, noise[j, idx])
                bad = ~np.all(np.isfinite(new), axis=1)
                for k in idx[bad]:
                    err = SimulationInstabilityError("non-finite state", path=int(k), step=step)
                    if strict:
                        raise err
                    errors[k] = str(err)
                    active[k] = False
                    exit_time[k] = step * dt
                new[bad] = cur[bad]
                new, over = clamp_states(model, new)
                clamps += int(np.count_nonzero(over > CLAMP_TOL))
                state[idx] = new
                dist = curve_distance(params, new)
                sup[idx] = np.fmax(sup[idx], dist)
                hit = classify_states(model, new, run.n_pop)
                done = (hit >= 0) & active[idx]
                codes[idx[done]] = hit[done]
                exit_time[idx[done]] = step * dt
                active[idx[done]] = False
            if keep_paths and step % run.record_every == 0:
                times.append(step * dt)
                records.append(state.copy())
    if not keep_paths:
        times.append(n_steps * dt)
        records.append(state.copy())

    failed = sum(e is not None for e in errors)
    if clamps:
        logger.warning("%d clamp(s) beyond %.0e over %d paths", clamps, CLAMP_TOL, n_paths)
    if failed:
        logger.warning("%d of %d paths became unstable", failed, n_paths)

    stats = tuple(
        NearCurveStat(
            path=k,
            sup_distance=float(sup[k]),
            within_bound=bool(sup[k] <= bound),
            exited=bool(codes[k] >= 0),
            exit_time=float(exit_time[k]),
            outcome=_ABSORBED[codes[k]] if codes[k] >= 0 else Outcome.CENSORED,
            error=errors[k],
        )
        for k in range(n_paths)
    )
    return SdeResult(
        run=run,
        times=np.asarray(times),
        paths=np.stack(records, axis=1),
        stats=stats,
        clamps=clamps,
    )


def theorem1_experiment(
    n_list: Sequence[int],
    start: Sequence[float],
    mu: float,
    gamma: float = 1.0,
    paths: int = 200,
    n_steps: int = 1000,
    seed: int = 0,
    noise_scale: float = 1.0,
) -> List[Theorem1Row]:
    """Monte Carlo of E sup_{t <= gamma log N / N} |Z_t - Z0_t|^2 for the 2D model.

    The diffusion and the reference ODE both run with drift 2N F on the
    same step grid; the ODE uses RK4.
    """
    start_arr = np.asarray(start, dtype=float)
    if start_arr.shape != (2,) or np.any(start_arr <= 0.0) or np.any(start_arr >= 1.0):
        raise ParameterError("start must be an interior point (x, y)")
    rows = []
    for i, n_pop in enumerate(n_list):
        horizon = gamma * np.log(n_pop) / n_pop
        dt = horizon / n_steps
        run = SdeRun(
            model="watterson",
            mu=mu,
            n_pop=n_pop,
            dt=dt,
            horizon=horizon,
            seed=seed,
            paths=paths,
            start=list(start_arr),
            noise_scale=noise_scale,
        )
        result = integrate_sde(run, run_index=i)
        reference = integrate_ode(WattersonParams(mu=mu), start_arr, horizon, dt, speed=2.0 * n_pop)
        steps = result.paths.shape[1]
        gap = ((result.paths - reference.states[None, :steps]) ** 2).sum(axis=-1)
        estimate, half = mean_ci(gap.max(axis=1))
        logger.info("theorem1 N=%d: estimate %.4g (bound %.4g)", n_pop, estimate, n_pop**-0.5)
        rows.append(Theorem1Row(int(n_pop), float(horizon), float(dt), estimate, half, float(n_pop) ** -0.5))
    return rows


def containment_experiment(
    n_list: Sequence[int],
    mu: float,
    delta: float = 0.3,
    horizon: float = 1.0,
    paths: int = 200,
    seed: int = 0,
    start: Optional[Sequence[float]] = None,
) -> List[ContainmentRow]:
    """Fraction of 2D paths with sup |mu - X^2 Y^2| <= 2 N^-delta up to min(tau, T).

    Starts at the symmetric curve point unless `start` is given; the step is
    chosen per N so that dt 2N sup|F| = 0.1.
    """
    if start is None:
        root = mu**0.25
        start = [root, root]
    rows = []
    for i, n_pop in enumerate(n_list):
        dt = 0.1 / (2.0 * n_pop * 4.0 / 27.0)
        run = SdeRun(
            model="watterson",
            mu=mu,
            n_pop=n_pop,
            dt=dt,
            horizon=horizon,
            seed=seed,
            paths=paths,
            start=list(start),
            delta=delta,
        )
        result = integrate_sde(run, run_index=i, keep_paths=False)
        absorbed = sum(s.exited for s in result.stats)
        fraction = result.containment_fraction
        logger.info("containment N=%d: %.3f of %d paths within 2N^-%.2g", n_pop, fraction, paths, delta)
        rows.append(ContainmentRow(int(n_pop), 2.0 * n_pop ** (-delta), fraction, paths, absorbed))
    return rows


def mc_exit_time_1d(
    d: Diffusion1D,
    x0: float,
    paths: int,
    dt: float,
    seed: int,
    time_cap: Optional[float] = None,
    run_index: int = 0,
) -> ExitTimeEstimate:
    """Euler-Maruyama estimate of the mean time to leave d's interval from x0.

    Paths still inside at `time_cap` are censored and left out of the mean.
    The cap defaults to ten times the quadrature value.

    Raises:
        ParameterError: If x0 is not interior or the cap is below ten times
            the quadrature value.
    """
    lo, hi = d.interval
    if not lo < x0 < hi:
        raise ParameterError(f"start {x0!r} must lie inside {d.interval}")
    predicted = mean_exit_time(d, x0, check_refinement=False)
    if time_cap is None:
        time_cap = 10.0 * predicted
    elif time_cap < 10.0 * predicted:
        raise ParameterError(f"time cap {time_cap:g} is below ten times the predicted {predicted:.4g}")
    n_steps = int(np.ceil(time_cap / dt))
    x = np.full(paths, float(x0))
    tau = np.full(paths, np.nan)
    active = np.ones(paths, dtype=bool)
    gens = [derive_rng(seed, run_index, k) for k in range(paths)]
    block = max(1, BLOCK_BUDGET // paths)
    root_dt = np.sqrt(dt)

    step = 0
    while step < n_steps and active.any():
        m = min(block, n_steps - step)
        noise = np.stack([g.standard_normal(m) for g in gens], axis=1)
        for j in range(m):
            step += 1
            idx = np.flatnonzero(active)
            if not idx.size:
                break
            cur = x[idx]
            a = np.clip(np.asarray(d.variance(cur), dtype=float), 0.0, None)
            new = cur + np.asarray(d.drift(cur), dtype=float) * dt + np.sqrt(a) * root_dt * noise[j, idx]
            x[idx] = new
            out = (new <= lo) | (new >= hi)
            tau[idx[out]] = step * dt
            active[idx[out]] = False

    censored = int(np.count_nonzero(active))
    if censored:
        logger.warning("%s: %d of %d paths censored at t=%g", d.name, censored, paths, time_cap)
    mean, half = mean_ci(tau)
    return ExitTimeEstimate(mean=mean, half_width=half, paths=paths, censored=censored, dt=dt)
