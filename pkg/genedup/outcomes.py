"""Absorption outcomes shared by the discrete models and the 6D diffusion."""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable

import numpy as np


class Outcome(str, Enum):
    GENE1_LOST = "gene1-lost"
    GENE2_LOST = "gene2-lost"
    SUBFUNCTIONALIZED = "subfunctionalized"
    CENSORED = "censored"


@dataclass(frozen=True)
class AbsorptionOutcome:
    """How and when one replicate ended.

    `time` is in generations for the discrete models and in diffusion time
    units for the SDE.
    """

    kind: Outcome
    time: float
    replicate: int = 0

    @property
    def absorbed(self) -> bool:
        return self.kind is not Outcome.CENSORED


def tally(outcomes: Iterable[AbsorptionOutcome]) -> Dict[str, int]:
    """Count outcomes by kind, every kind present."""
    counts = {kind.value: 0 for kind in Outcome}
    for item in outcomes:
        counts[item.kind.value] += 1
    return counts


def derive_rng(seed: int, run: int, index: int) -> np.random.Generator:
    """Independent generator for replicate `index` of run `run`.

    The stream depends only on (seed, run, index), so a replicate reproduces
    exactly whether it is simulated alone or in a batch.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(run, index)))
