"""Discrete Wright-Fisher version of the double-recessive-null model.

N individuals carry 2N copies of each gene. A generation is built by
rejection: pick two gene-1 copies and two gene-2 copies with replacement,
let each picked functional copy mutate to null with probability mu, and
discard the individual if all four copies are null (aabb). Accepted
individuals are tallied until there are N of them; loci are unlinked, so
only the two null-copy counts are kept.

The accepted individual types are i.i.d. with the conditional law of the
(null gene-1 copies, null gene-2 copies) pair given viability, so a
generation is a single multinomial draw over the eight viable classes.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
from scipy.stats import binom

from .errors import ParameterError
from .outcomes import AbsorptionOutcome, Outcome, derive_rng
from .schemas import WattersonParams

logger = logging.getLogger(__name__)

# (null gene-1 copies, null gene-2 copies) per class, aabb excluded.
CLASSES = np.array([(k1, k2) for k1 in range(3) for k2 in range(3) if (k1, k2) != (2, 2)])


@dataclass(frozen=True)
class WfPopulation:
    """Null-allele counts among the 2N copies of each gene."""

    n_pop: int
    a_count: int = 0
    b_count: int = 0
    generation: int = 0

    def __post_init__(self):
        if self.n_pop < 1:
            raise ParameterError(f"population size must be positive, got {self.n_pop}")
        for name, count in (("a_count", self.a_count), ("b_count", self.b_count)):
            if not 0 <= count <= 2 * self.n_pop:
                raise ParameterError(f"{name}={count} outside [0, {2 * self.n_pop}]")

    @property
    def x(self) -> float:
        return self.a_count / (2 * self.n_pop)

    @property
    def y(self) -> float:
        return self.b_count / (2 * self.n_pop)

    @property
    def absorbed(self) -> bool:
        return self.a_count == 2 * self.n_pop or self.b_count == 2 * self.n_pop


def class_probabilities(x, y, mu: float) -> np.ndarray:
    """Probability of each viable class for null frequencies x, y.

    Vectorized over x and y; the last axis indexes CLASSES. Rows where
    x' = y' = 1 (no viable offspring) are all zero.
    """
    xm = np.asarray(x, dtype=float)
    ym = np.asarray(y, dtype=float)
    xm = xm + (1.0 - xm) * mu
    ym = ym + (1.0 - ym) * mu
    k1 = CLASSES[:, 0]
    k2 = CLASSES[:, 1]
    p1 = binom.pmf(k1, 2, xm[..., None])
    p2 = binom.pmf(k2, 2, ym[..., None])
    accept = 1.0 - (xm * ym) ** 2
    safe = np.where(accept > 0.0, accept, 1.0)
    return np.where(accept[..., None] > 0.0, p1 * p2 / safe[..., None], 0.0)


def wf_generation(pop: WfPopulation, p: WattersonParams, rng: np.random.Generator) -> WfPopulation:
    """One generation of rejection-sampled reproduction.

    The all-null deadlock x = y = 1 is absorbing and returned unchanged.
    """
    if pop.a_count == 2 * pop.n_pop and pop.b_count == 2 * pop.n_pop:
        return pop
    probs = class_probabilities(pop.x, pop.y, p.mu)
    n = rng.multinomial(pop.n_pop, probs)
    return replace(
        pop,
        a_count=int(n @ CLASSES[:, 0]),
        b_count=int(n @ CLASSES[:, 1]),
        generation=pop.generation + 1,
    )


def wf_kernel(pop: WfPopulation, p: WattersonParams) -> np.ndarray:
    """Exact distribution of the next (a_count, b_count).

    Returns:
        Array K of shape (2N+1, 2N+1) with K[a, b] the probability of
        moving to counts (a, b) in one generation.
    """
    size = 2 * pop.n_pop + 1
    if pop.a_count == size - 1 and pop.b_count == size - 1:
        kernel = np.zeros((size, size))
        kernel[-1, -1] = 1.0
        return kernel
    single = np.zeros((3, 3))
    single[CLASSES[:, 0], CLASSES[:, 1]] = class_probabilities(pop.x, pop.y, p.mu)
    kernel = np.zeros((size, size))
    kernel[0, 0] = 1.0
    # Sum of N i.i.d. individuals, one convolution per individual.
    for _ in range(pop.n_pop):
        step = np.zeros_like(kernel)
        for k1 in range(3):
            for k2 in range(3):
                if single[k1, k2]:
                    step[k1:, k2:] += single[k1, k2] * kernel[: size - k1, : size - k2]
        kernel = step
    return kernel


def _outcome(pop: WfPopulation, replicate: int) -> AbsorptionOutcome:
    kind = Outcome.GENE1_LOST if pop.a_count == 2 * pop.n_pop else Outcome.GENE2_LOST
    return AbsorptionOutcome(kind, float(pop.generation), replicate)


def wf_run_to_absorption(
    pop: WfPopulation,
    p: WattersonParams,
    cap: int,
    seed: int,
    run_index: int = 0,
    replicate: int = 0,
) -> AbsorptionOutcome:
    """Iterate generations until one gene is fixed for the null allele.

    Time is counted in generations from `pop.generation`; runs reaching
    `cap` generations are censored.
    """
    if cap <= 0:
        raise ParameterError("cap must be positive")
    rng = derive_rng(seed, run_index, replicate)
    while not pop.absorbed:
        if pop.generation >= cap:
            return AbsorptionOutcome(Outcome.CENSORED, float(cap), replicate)
        pop = wf_generation(pop, p, rng)
    return _outcome(pop, replicate)


def wf_replicates(
    start: WfPopulation,
    p: WattersonParams,
    reps: int,
    cap: int,
    seed: int,
    run_index: int = 0,
) -> List[AbsorptionOutcome]:
    """`reps` independent absorption runs from `start`, in lockstep.

    Class probabilities are computed for all live replicates at once; each
    replicate then draws from its own generator, so replicate k reports the
    same outcome as `wf_run_to_absorption(..., replicate=k)`.
    """
    if reps < 1 or cap <= 0:
        raise ParameterError("reps and cap must be positive")
    two_n = 2 * start.n_pop
    gens = [derive_rng(seed, run_index, k) for k in range(reps)]
    a = np.full(reps, start.a_count)
    b = np.full(reps, start.b_count)
    results: List[Optional[AbsorptionOutcome]] = [None] * reps
    generation = start.generation
    live = np.arange(reps)
    while True:
        done = (a[live] == two_n) | (b[live] == two_n)
        for k in live[done]:
            kind = Outcome.GENE1_LOST if a[k] == two_n else Outcome.GENE2_LOST
            results[k] = AbsorptionOutcome(kind, float(generation), int(k))
        live = live[~done]
        if not live.size:
            break
        if generation >= cap:
            for k in live:
                results[k] = AbsorptionOutcome(Outcome.CENSORED, float(cap), int(k))
            break
        probs = class_probabilities(a[live] / two_n, b[live] / two_n, p.mu)
        for row, k in enumerate(live):
            n = gens[k].multinomial(start.n_pop, probs[row])
            a[k] = n @ CLASSES[:, 0]
            b[k] = n @ CLASSES[:, 1]
        generation += 1
    censored = sum(r.kind is Outcome.CENSORED for r in results)
    if censored:
        logger.warning("%d of %d Wright-Fisher replicates censored at %d generations", censored, reps, cap)
    return results
