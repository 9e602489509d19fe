"""Subfunctionalization along a single lineage.

A freshly duplicated pair carries 4 regulatory regions and 2 coding
regions. Each regulatory region is lost at rate mu_r and each coding
region at rate mu_c. The pair subfunctionalizes only if the first loss is
regulatory and the next tolerated loss removes the other copy's
complementary region; losing the matching region of the other copy would
leave no working copy of that function and is lethal, so that lineage is
discarded.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .analytics import binomial_se, wilson_interval
from .errors import ParameterError
from .outcomes import derive_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RaceEstimate:
    estimate: float
    std_error: float
    lower: float
    upper: float
    reps: int
    successes: int

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        if self.std_error == 0.0:
            return self.estimate == value
        return abs(self.estimate - value) <= sigmas * self.std_error


def _check_rates(mu_r: float, mu_c: float) -> None:
    if mu_r < 0.0 or mu_c < 0.0:
        raise ParameterError("mutation rates must be nonnegative")
    if mu_r == 0.0 and mu_c == 0.0:
        raise ParameterError("mu_r and mu_c cannot both be zero")


def single_lineage_psub(mu_r: float, mu_c: float) -> float:
    """2 (mu_r / (2 mu_r + mu_c))^2.

    The first loss is regulatory with probability 4 mu_r / (4 mu_r + 2 mu_c);
    of the two non-lethal follow-ups, the complementary loss wins with
    probability mu_r / (2 mu_r + mu_c).
    """
    _check_rates(mu_r, mu_c)
    ratio = mu_r / (2.0 * mu_r + mu_c)
    return 2.0 * ratio * ratio


def _clock(rng: np.random.Generator, rate: float, size: int) -> np.ndarray:
    # Rate 0 gives a clock that never rings.
    with np.errstate(divide="ignore"):
        return rng.standard_exponential(size) / rate


def single_lineage_race_mc(mu_r: float, mu_c: float, reps: int, seed: int) -> RaceEstimate:
    """Monte Carlo of the two-stage exponential race.

    Stage one races the 4 regulatory clocks against the 2 coding clocks.
    After a regulatory loss in copy A, stage two races the complementary
    loss in copy B (rate mu_r), a further loss in copy A (mu_r + mu_c) and
    a lethal loss in copy B (mu_r + mu_c); lethal outcomes are redrawn.
    """
    _check_rates(mu_r, mu_c)
    if reps < 1:
        raise ParameterError("reps must be positive")
    rng = derive_rng(seed, 0, 0)
    regulatory_first = _clock(rng, 4.0 * mu_r, reps) < _clock(rng, 2.0 * mu_c, reps)

    pending = np.flatnonzero(regulatory_first)
    success = np.zeros(reps, dtype=bool)
    redraws = 0
    while pending.size:
        s = _clock(rng, mu_r, pending.size)
        i = _clock(rng, mu_r + mu_c, pending.size)
        lethal = _clock(rng, mu_r + mu_c, pending.size)
        decided = np.minimum(s, i) < lethal
        success[pending[decided]] = s[decided] < i[decided]
        redraws += int(np.count_nonzero(~decided))
        pending = pending[~decided]
    hits = int(np.count_nonzero(success))
    logger.debug("race: %d/%d subfunctionalized, %d lethal redraws", hits, reps, redraws)
    est, lo, hi = wilson_interval(hits, reps)
    return RaceEstimate(est, binomial_se(hits, reps), lo, hi, reps, hits)
