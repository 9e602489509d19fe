"""One-dimensional diffusion analytics by quadrature.

A diffusion on an open interval (l, r) with generator (1/2) a(z) f'' + b(z) f'
and both ends absorbing is summarised by its natural scale

    s'(y) = exp(-int_0^y 2 b(z) / a(z) dz)

and speed density m(y) = 1 / (a(y) s'(y)). The mean time to absorption from x
is the integral of the Green's function against m:

    E_x tau = int G(x, y) m(y) dy,

    G(x, y) = 2 (s(x) - s(l)) (s(r) - s(y)) / (s(r) - s(l))   for y >= x,
              2 (s(r) - s(x)) (s(y) - s(l)) / (s(r) - s(l))   for y <= x.

The log-scale is integrated by Gauss-Legendre panels between Chebyshev
nodes that cluster at the absorbing ends; the scale itself and the Green's
integral use the trapezoid rule on the same nodes.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import PchipInterpolator

from .errors import ParameterError, QuadratureError
from .numerics import graded_nodes
from .schemas import SubfuncParams, VarianceMode
from . import subfunc, watterson

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]

DEFAULT_NODES = 4096
ENDPOINT_OFFSET = 1e-10
GL_ORDER = 8
REFINE_TOL = 1e-4


@dataclass(frozen=True)
class Diffusion1D:
    """Generator (1/2) a(z) d^2 + b(z) d on an open interval, both ends absorbing.

    `drift` and `variance` must accept numpy arrays.
    """

    interval: Tuple[float, float]
    drift: Evaluator
    variance: Evaluator
    name: str = "diffusion"

    def __post_init__(self):
        lo, hi = self.interval
        if not lo < hi:
            raise ParameterError(f"interval must satisfy l < r, got {self.interval}")

    @property
    def left(self) -> float:
        return self.interval[0]

    @property
    def right(self) -> float:
        return self.interval[1]


@dataclass(frozen=True)
class ScaleSpeedTable:
    """Natural scale, its derivative and the speed density on a node grid."""

    z: np.ndarray
    scale: np.ndarray
    scale_prime: np.ndarray
    speed: np.ndarray
    origin: float
    phi_interp: PchipInterpolator = field(repr=False)
    scale_interp: PchipInterpolator = field(repr=False)

    def rescaled(self, factor: float, shift: float) -> "ScaleSpeedTable":
        """Same diffusion with s replaced by factor * s + shift."""
        if factor <= 0.0:
            raise ParameterError("scale factor must be positive")
        scale = factor * self.scale + shift
        return ScaleSpeedTable(
            z=self.z,
            scale=scale,
            scale_prime=factor * self.scale_prime,
            speed=self.speed / factor,
            origin=self.origin,
            phi_interp=self.phi_interp,
            scale_interp=PchipInterpolator(self.z, scale),
        )

    def scale_at(self, y: np.ndarray) -> np.ndarray:
        return self.scale_interp(y)

    def log_scale_prime_at(self, y: np.ndarray) -> np.ndarray:
        return -self.phi_interp(y)

    def node_index(self, x: float) -> int:
        i = int(np.searchsorted(self.z, x))
        if i >= self.z.size or self.z[i] != x:
            raise ParameterError(f"{x!r} is not a node of the table")
        return i


@dataclass(frozen=True)
class GreenProfile:
    """Samples of y -> G(x0, y) m(y); their integral is the mean exit time."""

    x0: float
    y: np.ndarray
    density: np.ndarray

    def total(self) -> float:
        return float(trapezoid(self.density, self.y))


@dataclass(frozen=True)
class CoeffProfile:
    z: np.ndarray
    drift: np.ndarray
    variance: np.ndarray

    @property
    def log_scale_slope(self) -> np.ndarray:
        """-2 b / a, the derivative of log s'."""
        return -2.0 * self.drift / self.variance

    def rows(self) -> List[Tuple[float, float, float, float]]:
        return list(zip(self.z, self.drift, self.variance, self.log_scale_slope))


def _drift_over_variance(d: Diffusion1D, pts: np.ndarray) -> np.ndarray:
    a = np.asarray(d.variance(pts), dtype=float)
    b = np.asarray(d.drift(pts), dtype=float)
    bad = ~np.isfinite(a) | ~np.isfinite(b) | (a <= 0.0)
    if np.any(bad):
        where = float(pts[bad].flat[0])
        raise QuadratureError(f"{d.name}: coefficients not usable", location=where)
    return 2.0 * b / a


def natural_scale(
    d: Diffusion1D,
    nodes: int = DEFAULT_NODES,
    offset: float = ENDPOINT_OFFSET,
    extra_nodes: Sequence[float] = (),
    origin: Optional[float] = None,
) -> ScaleSpeedTable:
    """Tabulate s, s' and m on graded nodes.

    Args:
        d: The diffusion.
        nodes: Number of Chebyshev nodes; the outermost sit `offset` inside
            the interval.
        offset: Distance of the outermost nodes from the absorbing ends.
        extra_nodes: Interior points added to the grid (e.g. a start point).
        origin: Point where s = 0 and s' = 1; 0 when inside the interval,
            else the midpoint.

    Returns:
        ScaleSpeedTable over the merged node grid.

    Raises:
        QuadratureError: If 2b/a or s' is not finite somewhere on the grid.
    """
    lo, hi = d.interval
    if origin is None:
        origin = 0.0 if lo < 0.0 < hi else 0.5 * (lo + hi)
    extra = [v for v in (*extra_nodes, origin) if lo + offset < v < hi - offset]
    z = np.union1d(graded_nodes(lo, hi, nodes, offset), np.asarray(extra, dtype=float))

    t, w = leggauss(GL_ORDER)
    half = 0.5 * np.diff(z)
    mid = 0.5 * (z[1:] + z[:-1])
    pts = mid[:, None] + half[:, None] * t[None, :]
    panels = (_drift_over_variance(d, pts) * w).sum(axis=1) * half
    phi = np.concatenate(([0.0], np.cumsum(panels)))
    i0 = int(np.searchsorted(z, origin))
    phi -= phi[min(i0, z.size - 1)]

    scale_prime = np.exp(-phi)
    if not np.all(np.isfinite(scale_prime)):
        where = float(z[~np.isfinite(scale_prime)][0])
        raise QuadratureError(f"{d.name}: scale derivative overflows", location=where)
    scale = cumulative_trapezoid(scale_prime, z, initial=0.0)
    scale -= scale[min(i0, z.size - 1)]
    a = np.asarray(d.variance(z), dtype=float)
    speed = 1.0 / (a * scale_prime)
    if not np.all(np.isfinite(speed)):
        where = float(z[~np.isfinite(speed)][0])
        raise QuadratureError(f"{d.name}: speed density not finite", location=where)

    logger.debug("%s: natural scale on %d nodes, s(r)-s(l)=%.6g", d.name, z.size, scale[-1] - scale[0])
    return ScaleSpeedTable(
        z=z,
        scale=scale,
        scale_prime=scale_prime,
        speed=speed,
        origin=float(origin),
        phi_interp=PchipInterpolator(z, phi),
        scale_interp=PchipInterpolator(z, scale),
    )


def _green_density(table: ScaleSpeedTable, x0: float, y: np.ndarray, s_y: np.ndarray, m_y: np.ndarray) -> np.ndarray:
    s_l, s_r = table.scale[0], table.scale[-1]
    s_x = float(table.scale_at(x0))
    span = s_r - s_l
    left = 2.0 * (s_r - s_x) * (s_y - s_l) * m_y / span
    right = 2.0 * (s_x - s_l) * (s_r - s_y) * m_y / span
    return np.where(y <= x0, left, right)


def exit_time_from_table(table: ScaleSpeedTable, x0: float, lo: Optional[float] = None, hi: Optional[float] = None) -> float:
    """Integral of G(x0, y) m(y) over [lo, hi] (default: the whole grid).

    x0 must be a node of the table; lo and hi are snapped to the nearest nodes.
    """
    i0 = table.node_index(x0)
    density = _green_density(table, table.z[i0], table.z, table.scale, table.speed)
    i_lo = 0 if lo is None else int(np.argmin(np.abs(table.z - lo)))
    i_hi = table.z.size - 1 if hi is None else int(np.argmin(np.abs(table.z - hi)))
    return float(trapezoid(density[i_lo : i_hi + 1], table.z[i_lo : i_hi + 1]))


def _inside(d: Diffusion1D, x0: float, offset: float) -> bool:
    if x0 < d.left or x0 > d.right or np.isnan(x0):
        raise ParameterError(f"start {x0!r} outside {d.interval}")
    return d.left + offset < x0 < d.right - offset


def mean_exit_time(
    d: Diffusion1D,
    x0: float,
    nodes: int = DEFAULT_NODES,
    offset: float = ENDPOINT_OFFSET,
    check_refinement: bool = True,
) -> float:
    """Expected time to hit either end starting from x0.

    With `check_refinement`, the value is recomputed on half the nodes and
    the two must agree to REFINE_TOL relative.

    Raises:
        ParameterError: If x0 lies outside the closed interval.
        QuadratureError: On a non-finite integrand or failed refinement.
    """
    if not _inside(d, x0, offset):
        return 0.0
    fine = exit_time_from_table(natural_scale(d, nodes, offset, extra_nodes=(x0,)), x0)
    if check_refinement:
        coarse = exit_time_from_table(natural_scale(d, nodes // 2, offset, extra_nodes=(x0,)), x0)
        change = abs(fine - coarse) / abs(fine)
        logger.debug("%s: exit time %.9g (half-resolution change %.2e)", d.name, fine, change)
        if change > REFINE_TOL:
            raise QuadratureError(f"{d.name}: exit time not converged (relative change {change:.2e})", location=x0)
    return fine


def green_profile(
    d: Diffusion1D,
    x0: float,
    n_points: int = 400,
    nodes: int = DEFAULT_NODES,
    offset: float = ENDPOINT_OFFSET,
) -> GreenProfile:
    """G(x0, y) m(y) sampled on n_points graded points plus x0 itself."""
    if not _inside(d, x0, offset):
        raise ParameterError(f"start {x0!r} is absorbed")
    table = natural_scale(d, nodes, offset, extra_nodes=(x0,))
    y = np.union1d(graded_nodes(d.left, d.right, n_points, offset), [x0])
    s_y = table.scale_at(y)
    m_y = 1.0 / (np.asarray(d.variance(y), dtype=float) * np.exp(table.log_scale_prime_at(y)))
    density = _green_density(table, x0, y, s_y, m_y)
    return GreenProfile(x0=float(x0), y=y, density=np.maximum(density, 0.0))


def coeff_profile(d: Diffusion1D, n_points: int) -> CoeffProfile:
    """Drift and variance on n_points spaced uniformly strictly inside the interval."""
    k = np.arange(1, n_points + 1)
    z = d.left + (d.right - d.left) * k / (n_points + 1)
    return CoeffProfile(
        z=z,
        drift=np.asarray(d.drift(z), dtype=float),
        variance=np.asarray(d.variance(z), dtype=float),
    )


def tabulated(d: Diffusion1D, nodes: int = 2048, offset: float = ENDPOINT_OFFSET) -> Diffusion1D:
    """Copy of d whose coefficients are monotone cubic interpolants on graded nodes.

    Used where the coefficients are evaluated many times, as in Monte Carlo.
    """
    z = graded_nodes(d.left, d.right, nodes, offset)
    drift = PchipInterpolator(z, np.asarray(d.drift(z), dtype=float))
    variance = PchipInterpolator(z, np.asarray(d.variance(z), dtype=float))
    return Diffusion1D(
        interval=d.interval,
        drift=lambda y: drift(y),
        variance=lambda y: np.maximum(variance(y), 0.0),
        name=f"{d.name}[tabulated]",
    )


def watterson_diffusion(mu: float, variance_mode: VarianceMode = "published") -> Diffusion1D:
    """Limiting diffusion of x* - y* in the double-recessive-null model."""
    return Diffusion1D(
        interval=watterson.interval_w(mu),
        drift=lambda z: watterson.limit_coeffs_w(z, mu, variance_mode)[0],
        variance=lambda z: watterson.limit_coeffs_w(z, mu, variance_mode)[1],
        name=f"watterson(mu={mu:g},{variance_mode})",
    )


def subfunc_diffusion(b: float, variance_mode: VarianceMode = "published") -> Diffusion1D:
    """Limiting diffusion of x3* - y3* in the subfunctionalization model."""
    p = SubfuncParams(b=b)
    return Diffusion1D(
        interval=(-p.alpha, p.alpha),
        drift=lambda z: subfunc.limit_coeffs_s(z, p, variance_mode)[0],
        variance=lambda z: subfunc.limit_coeffs_s(z, p, variance_mode)[1],
        name=f"subfunc(b={b:g},{variance_mode})",
    )


def constant_diffusion(half_width: float, drift: float = 0.0, variance: float = 1.0) -> Diffusion1D:
    """Constant-coefficient diffusion on (-half_width, half_width); a reference case."""
    return Diffusion1D(
        interval=(-half_width, half_width),
        drift=lambda z: np.full_like(np.asarray(z, dtype=float), drift),
        variance=lambda z: np.full_like(np.asarray(z, dtype=float), variance),
        name="constant",
    )
