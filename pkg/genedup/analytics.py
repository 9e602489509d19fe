"""Summary statistics for simulation output.

This module contains functions that turn replicate samples into the numbers
reported in tables: sample means with normal confidence intervals, binomial
proportions with Wilson intervals, and the weighted straight-line fit used
for the decay of the subfunctionalization probability with population size.
"""

from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np
from scipy import stats

from .errors import ParameterError


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    slope_se: float
    points: int


def z_value(level: float = 0.95) -> float:
    """Two-sided normal quantile for a confidence level."""
    if not 0.0 < level < 1.0:
        raise ParameterError(f"confidence level must lie in (0, 1), got {level}")
    return float(stats.norm.ppf(0.5 + level / 2.0))


def mean_ci(samples: Iterable[float], level: float = 0.95) -> Tuple[float, float]:
    """Return the sample mean and the half-width of its normal CI.

    Args:
        samples: Finite sample values; NaNs are dropped.
        level: Confidence level.

    Returns:
        Tuple of (mean, half_width). The half-width is NaN for fewer than
        two samples.
    """
    arr = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=float)
    arr = arr[np.isfinite(arr)]
    if arr.size == 0:
        return float("nan"), float("nan")
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, float("nan")
    half = z_value(level) * float(arr.std(ddof=1)) / np.sqrt(arr.size)
    return mean, half


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> Tuple[float, float, float]:
    """Proportion estimate with its Wilson score interval.

    Returns:
        Tuple of (estimate, lower, upper).
    """
    if trials <= 0 or successes < 0 or successes > trials:
        raise ParameterError(f"need 0 <= successes <= trials, trials > 0; got {successes}/{trials}")
    z = z_value(level)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2.0 * trials)) / denom
    spread = z * np.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denom
    return p, max(0.0, centre - spread), min(1.0, centre + spread)


def binomial_se(successes: int, trials: int) -> float:
    p = successes / trials
    return float(np.sqrt(p * (1.0 - p) / trials))


def weighted_linear_fit(x, y, weights=None) -> LinearFit:
    """Weighted least-squares line y = intercept + slope * x.

    R^2 is the weighted coefficient of determination.

    Raises:
        ParameterError: With fewer than two points or non-positive weights.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    w = np.ones_like(xs) if weights is None else np.asarray(weights, dtype=float)
    if xs.size < 2 or xs.shape != ys.shape or w.shape != xs.shape:
        raise ParameterError("need at least two (x, y) points of matching shape")
    if np.any(w <= 0.0):
        raise ParameterError("weights must be positive")
    x_bar = np.sum(w * xs) / np.sum(w)
    y_bar = np.sum(w * ys) / np.sum(w)
    sxx = np.sum(w * (xs - x_bar) ** 2)
    if sxx == 0.0:
        raise ParameterError("x values are all equal")
    slope = np.sum(w * (xs - x_bar) * (ys - y_bar)) / sxx
    intercept = y_bar - slope * x_bar
    resid = ys - intercept - slope * xs
    ss_res = np.sum(w * resid**2)
    ss_tot = np.sum(w * (ys - y_bar) ** 2)
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    dof = xs.size - 2
    slope_se = np.sqrt(ss_res / dof / sxx) if dof > 0 else float("nan")
    return LinearFit(float(slope), float(intercept), float(r_squared), float(slope_se), int(xs.size))
