"""Pydantic schemas for model parameters and experiment configuration.

These models validate everything that crosses a module boundary: the
mutation-rate parameters of the two models, the settings of a stochastic
run, and the resolved configuration and manifest of a CLI experiment.
All models are frozen; derived quantities are exposed as properties.
"""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ModelTag = Literal["watterson", "subfunc"]
VarianceMode = Literal["published", "exact"]

COMMANDS = (
    "curve",
    "coeffs",
    "green",
    "exit-time",
    "linearize",
    "simulate",
    "sde",
    "theorem1",
    "psub-scan",
    "verify",
)
SUITES = ("lemmas", "curve", "rh", "ito", "oracles")

# Sup of |F| over the admissible set, used by the step-size guard.
_DRIFT_BOUND = {"watterson": 4.0 / 27.0, "subfunc": 1.0}


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class WattersonParams(_Frozen):
    """Parameters of the double-recessive-null model."""

    mu: float = Field(gt=0.0, lt=1.0)
    n_pop: Optional[int] = Field(default=None, ge=2)

    @property
    def sqrt_mu(self) -> float:
        return self.mu ** 0.5


class SubfuncParams(_Frozen):
    """Parameters of the subfunctionalization model (mu_r = mu_c = b)."""

    b: float = Field(gt=0.0, lt=1.0 / 3.0)
    n_pop: Optional[int] = Field(default=None, ge=2)

    @property
    def alpha(self) -> float:
        return 1.0 - 3.0 * self.b

    @property
    def beta(self) -> float:
        return 1.0 - self.b


class SdeRun(_Frozen):
    """Settings of an Euler-Maruyama run of the 2D or 6D diffusion."""

    model: ModelTag
    mu: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    b: Optional[float] = Field(default=None, gt=0.0, lt=1.0 / 3.0)
    n_pop: int = Field(ge=2)
    dt: float = Field(gt=0.0)
    horizon: float = Field(gt=0.0)
    seed: int = Field(default=0, ge=0)
    paths: int = Field(default=1, ge=1)
    start: List[float]
    noise_scale: float = Field(default=1.0, ge=0.0)
    drift_scale: float = Field(default=1.0, ge=0.0)
    delta: float = Field(default=0.3, gt=0.0, lt=0.5)
    record_every: int = Field(default=1, ge=1)
    max_step_fraction: float = Field(default=0.25, gt=0.0)

    @model_validator(mode="after")
    def _check_model_fields(self) -> "SdeRun":
        if self.model == "watterson":
            if self.mu is None:
                raise ValueError("watterson runs require mu")
            if len(self.start) != 2:
                raise ValueError("watterson start must be (x, y)")
        else:
            if self.b is None:
                raise ValueError("subfunc runs require b")
            if len(self.start) != 6:
                raise ValueError("subfunc start must be (x3, x2, x1, y3, y2, y1)")
        if any(v < 0.0 or v > 1.0 for v in self.start):
            raise ValueError("start frequencies must lie in [0, 1]")
        if self.model == "subfunc" and (sum(self.start[:3]) > 1.0 or sum(self.start[3:]) > 1.0):
            raise ValueError("start frequencies at a locus must sum to at most 1")
        if self.stability_number > self.max_step_fraction:
            raise ValueError(
                f"dt={self.dt:g} too large for N={self.n_pop}: "
                f"dt*2N*sup|F|={self.stability_number:.3g} exceeds {self.max_step_fraction:g}"
            )
        return self

    @property
    def stability_number(self) -> float:
        return self.dt * 2.0 * self.n_pop * self.drift_scale * _DRIFT_BOUND[self.model]

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))


class ExperimentConfig(_Frozen):
    """Fully resolved configuration of one CLI command."""

    command: Literal[COMMANDS]
    model: ModelTag = "watterson"
    mu: float = Field(default=1e-4, gt=0.0, lt=1.0)
    b: float = Field(default=1e-3, gt=0.0, lt=1.0 / 3.0)
    pop_size: Optional[int] = Field(default=None, ge=2)
    n_list: List[int] = Field(default_factory=list)
    reps: int = Field(default=1000, ge=1)
    paths: int = Field(default=200, ge=1)
    dt: float = Field(default=1e-4, gt=0.0)
    horizon: float = Field(default=1.0, gt=0.0)
    grid: int = Field(default=200, ge=3)
    nodes: int = Field(default=4096, ge=64)
    seed: int = Field(ge=0)
    delta: float = Field(default=0.3, gt=0.0, lt=0.5)
    gamma: float = Field(default=1.0, gt=0.0)
    n_steps: int = Field(default=1000, ge=10)
    start: Optional[List[float]] = None
    time_cap: Optional[float] = Field(default=None, gt=0.0)
    variance_mode: VarianceMode = "published"
    flow_lines: int = Field(default=0, ge=0)
    suite: Optional[Literal[SUITES]] = None
    out: str = "out"

    @field_validator("n_list")
    @classmethod
    def _ascending(cls, value: List[int]) -> List[int]:
        if any(n < 2 for n in value):
            raise ValueError("population sizes must be at least 2")
        if list(value) != sorted(value):
            raise ValueError("population sizes must be ascending")
        return value

    @model_validator(mode="after")
    def _check_command(self) -> "ExperimentConfig":
        if self.command == "verify" and self.suite is None:
            raise ValueError("verify requires a suite")
        if self.command in ("linearize",) and self.model != "subfunc":
            raise ValueError("linearize applies to the subfunc model only")
        return self

    @property
    def params(self):
        """Model parameters selected by `model`."""
        if self.model == "watterson":
            return WattersonParams(mu=self.mu, n_pop=self.pop_size)
        return SubfuncParams(b=self.b, n_pop=self.pop_size)


class RunManifest(_Frozen):
    """Provenance record written last into every output directory."""

    tool: str
    version: str
    config: Dict
    seed: int
    started_at: str
    finished_at: str
    outputs: Dict[str, str]
