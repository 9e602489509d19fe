"""Closed-form machinery for Watterson's double-recessive-null model.

Two duplicate loci each carry a functional allele (A, B) that mutates to a
null allele (a, b) with probability mu; only the aabb combination is
inviable. With x and y the null-allele frequencies, the deterministic part
of the diffusion is

    dx/dt = (1 - x)(mu - x^2 y^2),    dy/dt = (1 - y)(mu - x^2 y^2).

Every solution moves along the straight line through (1, 1) until it hits
the curve of equilibria x y = sqrt(mu). The projection map sends a state to
that hitting point; the difference x* - y* of the projected coordinates is
the slow variable whose limiting one-dimensional diffusion governs the
time to gene loss.

All functions are pure. Functions that take a curve coordinate `z` or a
line ratio `u` accept scalars or numpy arrays.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

from .errors import ParameterError, SingularProjectionError
from .schemas import VarianceMode, WattersonParams

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class WState:
    """Null-allele frequencies (x at locus 1, y at locus 2)."""

    x: float
    y: float

    def __post_init__(self):
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ParameterError(f"state ({self.x}, {self.y}) outside the unit square")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class WCurvePoint:
    """A point (x*, y*) on the curve of equilibria x* y* = sqrt(mu)."""

    x_star: float
    y_star: float

    @property
    def z(self) -> float:
        """Curve coordinate x* - y*."""
        return self.x_star - self.y_star

    @property
    def u(self) -> float:
        """Line ratio (1 - x*) / (1 - y*); infinite at y* = 1."""
        if self.y_star == 1.0:
            return float("inf")
        return (1.0 - self.x_star) / (1.0 - self.y_star)

    def as_state(self) -> WState:
        return WState(self.x_star, self.y_star)


def _sqrt_mu(mu: float) -> float:
    if not 0.0 < mu < 1.0:
        raise ParameterError(f"mu must lie in (0, 1), got {mu}")
    return float(np.sqrt(mu))


def ode_field_w(s: WState, p: WattersonParams) -> Tuple[float, float]:
    """Deterministic rates of the null-allele frequencies.

    Args:
        s: Current state.
        p: Model parameters.

    Returns:
        Tuple of (dx/dt, dy/dt).
    """
    h = p.mu - s.x * s.x * s.y * s.y
    return ((1.0 - s.x) * h, (1.0 - s.y) * h)


def field_array(state: np.ndarray, mu: float) -> np.ndarray:
    """Vectorized field on arrays whose last axis holds (x, y)."""
    x = state[..., 0]
    y = state[..., 1]
    h = mu - x * x * y * y
    return np.stack(((1.0 - x) * h, (1.0 - y) * h), axis=-1)


def _radicand(u: np.ndarray, s: float) -> np.ndarray:
    return (1.0 - u) ** 2 + 4.0 * s * u


def _check_ratio(u: ArrayLike) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0.0) or np.any(np.isnan(arr)):
        raise ParameterError("line ratio u must be nonnegative")
    return arr


def _scalar_or_array(value: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(value)
    return value


def g_eval(u: ArrayLike, mu: float) -> ArrayLike:
    """Curve coordinate x* reached along the line with ratio u = (1-x)/(1-y).

    g(u) = [(1 - u) + sqrt((1 - u)^2 + 4 sqrt(mu) u)] / 2, the positive root
    of x*^2 + (u - 1) x* - sqrt(mu) u = 0. For u > 1 the equivalent form
    2 sqrt(mu) u / (sqrt(R) + u - 1) avoids cancellation.

    Args:
        u: Nonnegative line ratio; may be infinite.
        mu: Mutation probability.

    Returns:
        The x* coordinate, in [sqrt(mu), 1].

    Raises:
        ParameterError: If u < 0.
    """
    s = _sqrt_mu(mu)
    arr = _check_ratio(u)
    flat = np.atleast_1d(arr)
    out = np.empty_like(flat)
    inf = np.isinf(flat)
    low = (flat <= 1.0) & ~inf
    high = (flat > 1.0) & ~inf
    ul = flat[low]
    out[low] = 0.5 * ((1.0 - ul) + np.sqrt(_radicand(ul, s)))
    uh = flat[high]
    out[high] = 2.0 * s * uh / (np.sqrt(_radicand(uh, s)) + uh - 1.0)
    out[inf] = s
    return _scalar_or_array(out.reshape(arr.shape), u)


def g_prime(u: ArrayLike, mu: float) -> ArrayLike:
    """First derivative of g.

    Algebraically equal to (1/2)(-1 + R'/(2 sqrt(R))) with
    R = (1 - u)^2 + 4 sqrt(mu) u, rewritten as
    -4 sqrt(mu)(1 - sqrt(mu)) / (sqrt(R) (R' + 2 sqrt(R))), which stays
    accurate for large u.
    """
    s = _sqrt_mu(mu)
    arr = _check_ratio(u)
    r = _radicand(arr, s)
    rp = -2.0 * (1.0 - arr) + 4.0 * s
    sr = np.sqrt(r)
    out = -4.0 * s * (1.0 - s) / (sr * (rp + 2.0 * sr))
    return _scalar_or_array(out, u)


def g_second(u: ArrayLike, mu: float) -> ArrayLike:
    """Second derivative of g, 2 sqrt(mu)(1 - sqrt(mu)) R^(-3/2)."""
    s = _sqrt_mu(mu)
    arr = _check_ratio(u)
    r = _radicand(arr, s)
    out = 2.0 * s * (1.0 - s) / (r * np.sqrt(r))
    return _scalar_or_array(out, u)


def project_w(s: WState, mu: float) -> WCurvePoint:
    """Project a state onto the curve of equilibria along its flow line.

    Args:
        s: State in the unit square, not the corner (1, 1).
        mu: Mutation probability.

    Returns:
        WCurvePoint with (1 - y*)/(1 - x*) = (1 - y)/(1 - x).

    Raises:
        SingularProjectionError: At the corner x = y = 1.
    """
    root = _sqrt_mu(mu)
    if s.x == 1.0 and s.y == 1.0:
        raise SingularProjectionError("projection undefined at (1, 1)")
    if s.y == 1.0:
        return WCurvePoint(root, 1.0)
    if s.x == 1.0:
        return WCurvePoint(1.0, root)
    u = (1.0 - s.x) / (1.0 - s.y)
    return WCurvePoint(g_eval(u, mu), g_eval(1.0 / u, mu))


def flow_line(s: WState, mu: float, n: int = 50) -> np.ndarray:
    """Sample the segment from s to its projection; rows are (x, y)."""
    end = project_w(s, mu)
    t = np.linspace(0.0, 1.0, n)[:, None]
    start = s.as_array()
    return start + t * (np.array([end.x_star, end.y_star]) - start)


def flow_fan(mu: float, k: int, n: int = 50) -> List[np.ndarray]:
    """Flow lines from k boundary points spread over ratios 1/10 .. 10."""
    lines = []
    for u in np.geomspace(0.1, 10.0, k):
        start = WState(1.0 - u, 0.0) if u <= 1.0 else WState(0.0, 1.0 - 1.0 / u)
        lines.append(flow_line(start, mu, n))
    return lines


def lyapunov_phi(s: WState, mu: float) -> float:
    """phi(x, y) = (mu - x^2 y^2)^2, zero exactly on the curve."""
    h = mu - s.x * s.x * s.y * s.y
    return h * h


def directional_derivative_identity(s: WState, mu: float) -> Tuple[float, float]:
    """Both sides of grad(phi) . F = -4xy(y(1-x) + x(1-y)) phi.

    Returns:
        Tuple of (lhs, rhs): lhs from the closed-form gradient contracted
        with the field, rhs from the product form.
    """
    x, y = s.x, s.y
    h = mu - x * x * y * y
    grad = (2.0 * h * (-2.0 * x * y * y), 2.0 * h * (-2.0 * x * x * y))
    fx, fy = (1.0 - x) * h, (1.0 - y) * h
    lhs = grad[0] * fx + grad[1] * fy
    rhs = -4.0 * x * y * (y * (1.0 - x) + x * (1.0 - y)) * h * h
    return lhs, rhs


def lyapunov_rate_bound(mu: float, n_pop: int, delta: float, grid: int = 400) -> float:
    """Estimate inf 4xy(y(1-x) + x(1-y)) over the band |mu - x^2 y^2| <= N^-delta.

    The infimum is the contraction rate of phi near the curve. It is zero
    whenever the band reaches an axis, i.e. when N^-delta >= mu.
    """
    _sqrt_mu(mu)
    eps = float(n_pop) ** (-delta)
    lo = max(mu - eps, 0.0)
    hi = mu + eps
    if lo == 0.0:
        return 0.0
    xs = np.linspace(np.sqrt(lo), 1.0, grid)
    t = np.linspace(0.0, 1.0, grid)
    y_lo = np.sqrt(lo) / xs
    y_hi = np.minimum(np.sqrt(hi) / xs, 1.0)
    x = xs[:, None]
    y = y_lo[:, None] + t[None, :] * (y_hi - y_lo)[:, None]
    rate = 4.0 * x * y * (y * (1.0 - x) + x * (1.0 - y))
    return float(rate.min())


def interval_w(mu: float) -> Tuple[float, float]:
    """Open interval of the curve coordinate z = x* - y*."""
    half = 1.0 - _sqrt_mu(mu)
    return -half, half


def _curve_coords(z: np.ndarray, s: float):
    root = np.sqrt(z * z + 4.0 * s)
    x = 0.5 * (z + root)
    y = 0.5 * (-z + root)
    edge = 1.0 - s
    # 1 - x and 1 - y without cancellation near the absorbing ends.
    om_x = 2.0 * (edge - z) / (2.0 - z + root)
    om_y = 2.0 * (edge + z) / (2.0 + z + root)
    return x, y, om_x, om_y


def curve_point_of_z(z: float, mu: float) -> WCurvePoint:
    """Curve point with x* - y* = z."""
    s = _sqrt_mu(mu)
    x, y, _, _ = _curve_coords(np.asarray(z, dtype=float), s)
    return WCurvePoint(float(x), float(y))


def curve_samples(mu: float, n: int) -> np.ndarray:
    """n points of x y = sqrt(mu) spaced uniformly in z; rows are (x*, y*)."""
    s = _sqrt_mu(mu)
    z = np.linspace(-(1.0 - s), 1.0 - s, n)
    x, y, _, _ = _curve_coords(z, s)
    return np.column_stack((x, y))


def limit_coeffs_w(z: ArrayLike, mu: float, variance_mode: VarianceMode = "published"):
    """Drift and variance of the limiting diffusion of x* - y*.

    The drift is half of the Ito second-order term of h(x, y) = x* - y*
    contracted with the diagonal diffusion matrix diag(x(1-x), y(1-y)),
    so the generator reads (1/2) a d^2 + b d.

    Args:
        z: Curve coordinate(s), strictly inside (-(1 - sqrt(mu)), 1 - sqrt(mu)).
        mu: Mutation probability.
        variance_mode: "published" sums the quadratic variations of x* and
            y* separately and omits their covariance, so it is not the Ito
            variance of h; "exact" is grad(h)^T A grad(h), which is.

    Returns:
        Tuple of (drift, variance), scalars or arrays matching z.

    Raises:
        ParameterError: If any |z| >= 1 - sqrt(mu).
    """
    s = _sqrt_mu(mu)
    zz = np.asarray(z, dtype=float)
    if np.any(np.abs(zz) >= 1.0 - s) or np.any(np.isnan(zz)):
        raise ParameterError(f"|z| must be below 1 - sqrt(mu) = {1.0 - s:.9g}")
    x, y, om_x, om_y = _curve_coords(zz, s)
    u = om_x / om_y
    v = om_y / om_x
    g1u, g2u = g_prime(u, mu), g_second(u, mu)
    g1v, g2v = g_prime(v, mu), g_second(v, mu)

    twice_drift = (
        g2u * x * om_x / om_y**2
        - g2v * y * om_y / om_x**2
        + g2u * om_x**2 * y / om_y**3
        + g1u * 2.0 * om_x * y / om_y**2
        - g2v * om_y**2 * x / om_x**3
        - g1v * 2.0 * om_y * x / om_x**2
    )
    if variance_mode == "published":
        variance = g1u**2 * (x * om_x / om_y**2 + om_x**2 * y / om_y**3) + g1v**2 * (
            y * om_y / om_x**2 + om_y**2 * x / om_x**3
        )
    elif variance_mode == "exact":
        dh_dx = -g1u / om_y - g1v * om_y / om_x**2
        dh_dy = g1u * om_x / om_y**2 + g1v / om_x
        variance = x * om_x * dh_dx**2 + y * om_y * dh_dy**2
    else:
        raise ParameterError(f"unknown variance mode {variance_mode!r}")
    drift = 0.5 * twice_drift
    if np.ndim(z) == 0:
        return float(drift), float(variance)
    return drift, variance


def projection_difference(x: float, y: float, mu: float) -> float:
    """h(x, y) = x* - y* for a raw state; used by finite-difference oracles."""
    point = project_w(WState(x, y), mu)
    return point.x_star - point.y_star
