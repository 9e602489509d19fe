"""Continuous-time Moran model of subfunctionalization.

Each individual carries one copy of gene 1 and one of gene 2. A copy's
state is a two-bit mask over its regulatory regions: 3 = 11 (both
functions), 2 = 10, 1 = 01 and 0 = 00 (null). An individual is viable when
the bitwise OR of its two states is 3, so the 9 viable types out of 16 are
tracked as counts indexed by 4 * state1 + state2.

Time runs in generations. Reproduction events occur at total rate N: a
uniformly chosen individual dies and an offspring with independently drawn
gene-1 and gene-2 copies replaces it if viable (the event is void
otherwise). Each copy mutates 3 -> {2, 1, 0} at rate b each and
2 -> 0, 1 -> 0 at rate 2b. A mutation that makes its carrier inviable
kills it; the carrier is replaced by an offspring drawn from the
population's marginals conditioned on viability.

Reproduction matches the selection part of the deterministic field
exactly. The lethal replacement does not: a pure mutation flux would move
one copy and leave the partner copy in place, whereas the replacement
removes both copies of the carrier. The mean drift is therefore the field
plus `lethal_replacement_drift`, a term linear in b.

Every event consumes exactly six uniforms per replicate (waiting time,
channel, victim, gene-1 draw, gene-2 draw, lethal replacement), so a
batch of replicates advanced in lockstep matches sequential runs.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analytics import LinearFit, weighted_linear_fit, wilson_interval
from .errors import ParameterError
from .outcomes import AbsorptionOutcome, Outcome, derive_rng
from .schemas import SubfuncParams

logger = logging.getLogger(__name__)

N_TYPES = 16
UNIFORMS_PER_EVENT = 6
BLOCK_EVENTS = 4096

VIABLE = np.array([(t // 4) | (t % 4) == 3 for t in range(N_TYPES)])
STATE1 = np.arange(N_TYPES) // 4
STATE2 = np.arange(N_TYPES) % 4
SUBFUNCTIONALIZED_TYPES = (4 * 2 + 1, 4 * 1 + 2)
# Indicator columns (state1 = 3, 2, 1, state2 = 3, 2, 1) per type.
PROFILES = np.column_stack([STATE1 == s for s in (3, 2, 1)] + [STATE2 == s for s in (3, 2, 1)]).astype(float)


def type_index(state1: int, state2: int) -> int:
    return 4 * state1 + state2


# Per-copy mutation targets and their rates in units of b.
_COPY_MUTATIONS = {3: ((2, 1.0), (1, 1.0), (0, 1.0)), 2: ((0, 2.0),), 1: ((0, 2.0),)}


@lru_cache(maxsize=1)
def mutation_channels() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(source type, destination type, rate / b) for every mutation channel."""
    src, dst, weight = [], [], []
    for t in np.flatnonzero(VIABLE):
        s1, s2 = STATE1[t], STATE2[t]
        for new, w in _COPY_MUTATIONS.get(s1, ()):
            src.append(t)
            dst.append(type_index(new, s2))
            weight.append(w)
        for new, w in _COPY_MUTATIONS.get(s2, ()):
            src.append(t)
            dst.append(type_index(s1, new))
            weight.append(w)
    return np.array(src), np.array(dst), np.array(weight)


@dataclass(frozen=True)
class MoranPopulation:
    """Type counts of a Moran population, indexed by 4 * state1 + state2."""

    counts: Tuple[int, ...]
    events: int = 0
    time: float = 0.0

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (N_TYPES,) or np.any(counts < 0):
            raise ParameterError("counts must be 16 nonnegative integers")
        if np.any(counts[~VIABLE] > 0):
            raise ParameterError("population contains inviable individuals")
        if counts.sum() < 1:
            raise ParameterError("population is empty")

    @classmethod
    def uniform(cls, n_pop: int, state1: int = 3, state2: int = 3) -> "MoranPopulation":
        counts = [0] * N_TYPES
        counts[type_index(state1, state2)] = n_pop
        return cls(tuple(counts))

    @classmethod
    def from_individuals(cls, pairs: Sequence[Tuple[int, int]]) -> "MoranPopulation":
        counts = [0] * N_TYPES
        for s1, s2 in pairs:
            counts[type_index(s1, s2)] += 1
        return cls(tuple(counts))

    def individuals(self) -> List[Tuple[int, int]]:
        return [(int(STATE1[t]), int(STATE2[t])) for t in range(N_TYPES) for _ in range(self.counts[t])]

    @property
    def n_pop(self) -> int:
        return int(sum(self.counts))

    def frequencies(self) -> np.ndarray:
        """(x3, x2, x1, y3, y2, y1) of the population."""
        c = np.asarray(self.counts, dtype=float)
        g1 = np.bincount(STATE1, weights=c, minlength=4)
        g2 = np.bincount(STATE2, weights=c, minlength=4)
        return np.concatenate((g1[3:0:-1], g2[3:0:-1])) / c.sum()


def classify_counts(counts: np.ndarray) -> np.ndarray:
    """Outcome code per row: 0 gene1-lost, 1 gene2-lost, 2 subfunctionalized, -1 running."""
    counts = np.atleast_2d(counts)
    n = counts.sum(axis=1)
    code = np.full(counts.shape[0], -1)
    sub = (counts[:, SUBFUNCTIONALIZED_TYPES[0]] == n) | (counts[:, SUBFUNCTIONALIZED_TYPES[1]] == n)
    code[sub] = 2
    code[counts[:, STATE2 == 0].sum(axis=1) == n] = 1
    code[counts[:, STATE1 == 0].sum(axis=1) == n] = 0
    return code


_KINDS = (Outcome.GENE1_LOST, Outcome.GENE2_LOST, Outcome.SUBFUNCTIONALIZED)


def _pick(cumulative: np.ndarray, target: np.ndarray) -> np.ndarray:
    """First index whose cumulative weight exceeds target, per row."""
    idx = (cumulative <= target[:, None]).sum(axis=1)
    return np.minimum(idx, cumulative.shape[1] - 1)


def _marginals(counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    g1 = np.zeros((counts.shape[0], 4))
    g2 = np.zeros((counts.shape[0], 4))
    for s in range(4):
        g1[:, s] = counts[:, STATE1 == s].sum(axis=1)
        g2[:, s] = counts[:, STATE2 == s].sum(axis=1)
    return g1, g2


def apply_events(counts: np.ndarray, u: np.ndarray, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """Advance each row of `counts` by one event driven by its uniforms.

    Args:
        counts: Integer array (R, 16) of type counts.
        u: Uniforms in [0, 1), shape (R, 6).
        b: Mutation rate per regulatory region or coding region.

    Returns:
        Tuple of (new counts, waiting times in generations).
    """
    src, dst, weight = mutation_channels()
    rows = np.arange(counts.shape[0])
    n = counts.sum(axis=1).astype(float)
    chan_rate = counts[:, src] * (weight * b)
    total = n + chan_rate.sum(axis=1)
    wait = -np.log1p(-u[:, 0]) / total
    target = u[:, 1] * total
    reproduce = target < n

    g1, g2 = _marginals(counts)
    new = counts.copy()

    # Reproduction: uniform victim, offspring drawn locus by locus.
    victim = _pick(np.cumsum(counts, axis=1), u[:, 2] * n)
    k = _pick(np.cumsum(g1, axis=1), u[:, 3] * n)
    l = _pick(np.cumsum(g2, axis=1), u[:, 4] * n)
    child = 4 * k + l
    born = reproduce & VIABLE[child]
    new[rows[born], victim[born]] -= 1
    new[rows[born], child[born]] += 1

    # Mutation channel, chosen in proportion to its rate.
    mutate = ~reproduce
    chan = _pick(np.cumsum(chan_rate, axis=1), target - n)
    m_rows = rows[mutate]
    m_chan = chan[mutate]
    new[m_rows, src[m_chan]] -= 1
    lands = VIABLE[dst[m_chan]]
    new[m_rows[lands], dst[m_chan[lands]]] += 1

    # Lethal mutation: carrier replaced by a viable offspring of the pre-event population.
    lethal_rows = m_rows[~lands]
    if lethal_rows.size:
        w = (g1[lethal_rows][:, STATE1] * g2[lethal_rows][:, STATE2]) * VIABLE
        cum = np.cumsum(w, axis=1)
        repl = _pick(cum, u[lethal_rows, 5] * cum[:, -1])
        new[lethal_rows, repl] += 1
    return new, wait


def moran_event(pop: MoranPopulation, p: SubfuncParams, rng: np.random.Generator) -> MoranPopulation:
    """Apply one event to `pop`, drawing six uniforms from rng."""
    u = rng.random(UNIFORMS_PER_EVENT)[None, :]
    counts, wait = apply_events(np.asarray(pop.counts)[None, :], u, p.b)
    return MoranPopulation(tuple(int(c) for c in counts[0]), pop.events + 1, pop.time + float(wait[0]))


def moran_kernel(pop: MoranPopulation, p: SubfuncParams) -> Dict[Tuple[int, ...], float]:
    """Exact distribution of the population after one event.

    The waiting time is ignored; voided reproduction events map back to the
    current counts.
    """
    src, dst, weight = mutation_channels()
    counts = np.asarray(pop.counts)
    n = counts.sum()
    chan_rate = counts[src] * weight * p.b
    total = n + chan_rate.sum()
    g1, g2 = (m[0] / n for m in _marginals(counts[None, :]))
    kernel: Dict[Tuple[int, ...], float] = {}

    def add(new: np.ndarray, prob: float) -> None:
        key = tuple(int(c) for c in new)
        kernel[key] = kernel.get(key, 0.0) + prob

    for victim in np.flatnonzero(counts):
        for child in range(N_TYPES):
            prob = (n / total) * (counts[victim] / n) * g1[STATE1[child]] * g2[STATE2[child]]
            if not prob:
                continue
            new = counts.copy()
            if VIABLE[child]:
                new[victim] -= 1
                new[child] += 1
            add(new, prob)
    viable_w = g1[STATE1] * g2[STATE2] * VIABLE
    for c in np.flatnonzero(chan_rate):
        prob = chan_rate[c] / total
        new = counts.copy()
        new[src[c]] -= 1
        if VIABLE[dst[c]]:
            new[dst[c]] += 1
            add(new, prob)
            continue
        for repl in np.flatnonzero(viable_w):
            out = new.copy()
            out[repl] += 1
            add(out, prob * viable_w[repl] / viable_w.sum())
    return kernel


def lethal_replacement_drift(pop: MoranPopulation, b: float) -> np.ndarray:
    """Mean frequency drift per generation minus the deterministic field.

    Each lethal channel contributes its rate times the difference between
    the viable replacement's mean profile and the inviable mutant's profile,
    divided by N. Zero when no mutation is lethal, e.g. for an all-(3, 3)
    population.
    """
    src, dst, weight = mutation_channels()
    counts = np.asarray(pop.counts, dtype=float)
    lethal = ~VIABLE[dst]
    rate = counts[src[lethal]] * weight[lethal] * b
    g1, g2 = (m[0] for m in _marginals(counts[None, :]))
    offspring = g1[STATE1] * g2[STATE2] * VIABLE
    replacement = offspring @ PROFILES / offspring.sum()
    return (rate[:, None] * (replacement[None, :] - PROFILES[dst[lethal]])).sum(axis=0) / counts.sum()


def run_to_absorption(
    pop: MoranPopulation,
    p: SubfuncParams,
    cap: float,
    seed: int,
    run_index: int = 0,
    replicate: int = 0,
) -> AbsorptionOutcome:
    """Run events until gene loss or subfunctionalization, or until `cap` generations."""
    if cap <= 0:
        raise ParameterError("cap must be positive")
    rng = derive_rng(seed, run_index, replicate)
    while True:
        code = classify_counts(np.asarray(pop.counts))[0]
        if code >= 0:
            return AbsorptionOutcome(_KINDS[code], pop.time, replicate)
        nxt = moran_event(pop, p, rng)
        if nxt.time > cap:
            return AbsorptionOutcome(Outcome.CENSORED, float(cap), replicate)
        pop = nxt


def moran_replicates(
    start: MoranPopulation,
    p: SubfuncParams,
    reps: int,
    cap: float,
    seed: int,
    run_index: int = 0,
) -> List[AbsorptionOutcome]:
    """`reps` absorption runs from `start`, advanced in lockstep.

    Replicate k uses the generator of `run_to_absorption(..., replicate=k)`
    and consumes it the same way, so the outcomes agree exactly.
    """
    if reps < 1 or cap <= 0:
        raise ParameterError("reps and cap must be positive")
    gens = [derive_rng(seed, run_index, k) for k in range(reps)]
    counts = np.tile(np.asarray(start.counts), (reps, 1))
    time = np.full(reps, start.time)
    results: List[Optional[AbsorptionOutcome]] = [None] * reps
    live = np.arange(reps)
    while live.size:
        draws = np.stack([gens[k].random((BLOCK_EVENTS, UNIFORMS_PER_EVENT)) for k in live], axis=1)
        for j in range(BLOCK_EVENTS):
            code = classify_counts(counts[live])
            for row in np.flatnonzero(code >= 0):
                k = live[row]
                results[k] = AbsorptionOutcome(_KINDS[code[row]], float(time[k]), int(k))
            keep = code < 0
            live, draws = live[keep], draws[:, keep]
            if not live.size:
                break
            new, wait = apply_events(counts[live], draws[j], p.b)
            late = time[live] + wait > cap
            for k in live[late]:
                results[k] = AbsorptionOutcome(Outcome.CENSORED, float(cap), int(k))
            ok = ~late
            counts[live[ok]] = new[ok]
            time[live[ok]] += wait[ok]
            live, draws = live[ok], draws[:, ok]
            if not live.size:
                break
    censored = sum(r.kind is Outcome.CENSORED for r in results)
    if censored:
        logger.warning("%d of %d Moran replicates censored at %g generations", censored, reps, cap)
    return results


@dataclass(frozen=True)
class PsubRow:
    n_pop: int
    reps: int
    subfunctionalized: int
    censored: int
    estimate: float
    lower: float
    upper: float

    @property
    def upper_bound_only(self) -> bool:
        return self.subfunctionalized == 0


@dataclass(frozen=True)
class PsubScan:
    b: float
    rows: Tuple[PsubRow, ...]
    fit: Optional[LinearFit]


def psub_decay_scan(
    n_list: Sequence[int],
    p: SubfuncParams,
    reps: int,
    seed: int,
    cap_factor: float = 100.0,
) -> PsubScan:
    """Probability of subfunctionalization against population size.

    Each N starts from N individuals of type (3, 3) and runs `reps`
    replicates capped at cap_factor * N generations. log P(S) is fitted
    linearly in N with weights n p / (1 - p), the inverse delta-method
    variance of log p-hat; sizes with no subfunctionalized replicate are
    reported by their Wilson upper bound and left out of the fit.
    """
    if list(n_list) != sorted(n_list) or any(n < 2 for n in n_list):
        raise ParameterError("population sizes must be ascending and at least 2")
    rows = []
    for i, n_pop in enumerate(n_list):
        results = moran_replicates(MoranPopulation.uniform(n_pop), p, reps, cap_factor * n_pop, seed, run_index=i)
        sub = sum(r.kind is Outcome.SUBFUNCTIONALIZED for r in results)
        cens = sum(r.kind is Outcome.CENSORED for r in results)
        est, lo, hi = wilson_interval(sub, reps)
        logger.info("psub N=%d: %d/%d subfunctionalized (%d censored)", n_pop, sub, reps, cens)
        rows.append(PsubRow(int(n_pop), reps, sub, cens, est, lo, hi))

    usable = [r for r in rows if 0 < r.subfunctionalized < r.reps]
    fit = None
    if len(usable) >= 2:
        xs = [r.n_pop for r in usable]
        ys = [np.log(r.estimate) for r in usable]
        ws = [r.reps * r.estimate / (1.0 - r.estimate) for r in usable]
        fit = weighted_linear_fit(xs, ys, ws)
        logger.info("log P(S) slope %.4g per individual, R^2 %.3f", fit.slope, fit.r_squared)
    else:
        logger.warning("fewer than two sizes with 0 < P(S) < 1; no fit")
    return PsubScan(b=p.b, rows=tuple(rows), fit=fit)
