"""Closed-form machinery for the subfunctionalization model.

Each gene copy is in state 3 = 11, 2 = 10, 1 = 01 or 0 = 00, the two digits
marking whether the regulatory functions 1 and 2 are intact. Regulatory and
coding mutations both occur at rate b. An individual is viable when its two
copies together cover both functions, which gives the mean fitness

    w = x3 + y3 - x3 y3 + x1 y2 + x2 y1.

Restricted to x2 = x1 = x and y2 = y1 = y, the fixed points form a curve
parametrised by x3 in [0, 1 - 3b]. The ratio y3/x3 is conserved by the
deterministic flow, so the projection of a state onto the curve is the curve
point with the same ratio; the difference x3* - y3* is the slow variable
whose limiting one-dimensional diffusion governs the time to gene loss.

Coordinate orders: states are stored per locus as (x3, x2, x1, y3, y2, y1);
Jacobians use (x3, y3, x2, x1, y2, y1).
"""

import functools
import logging
from dataclasses import dataclass, field
from typing import List, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, ParameterError, SingularProjectionError
from .numerics import chebyshev_nodes
from .schemas import SubfuncParams, VarianceMode

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

_EDGE_TOL = 1e-12
CURVE_NODES = 2048


@dataclass(frozen=True)
class SState:
    """Copy-state frequencies at gene 1 (x) and gene 2 (y)."""

    x3: float
    x2: float
    x1: float
    y3: float
    y2: float
    y1: float

    def __post_init__(self):
        values = self.as_array()
        if np.any(values < 0.0) or np.any(values > 1.0) or np.any(np.isnan(values)):
            raise ParameterError(f"frequencies must lie in [0, 1], got {values.tolist()}")
        if self.x0 < -_EDGE_TOL or self.y0 < -_EDGE_TOL:
            raise ParameterError("frequencies at a locus sum to more than 1")

    @property
    def x0(self) -> float:
        return 1.0 - self.x3 - self.x2 - self.x1

    @property
    def y0(self) -> float:
        return 1.0 - self.y3 - self.y2 - self.y1

    def as_array(self) -> np.ndarray:
        return np.array([self.x3, self.x2, self.x1, self.y3, self.y2, self.y1], dtype=float)

    @classmethod
    def from_array(cls, values) -> "SState":
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class SEquilibrium:
    """Point (x3, y3, x, y) on the curve of equilibria for mutation rate b."""

    x3: float
    y3: float
    x: float
    y: float
    b: float

    @property
    def alpha(self) -> float:
        return 1.0 - 3.0 * self.b

    @property
    def gamma(self) -> float:
        """x3 + y3 - x3 y3 - alpha, which equals -2xy on the curve."""
        return 3.0 * self.b - (1.0 - self.x3) * (1.0 - self.y3)

    @property
    def z(self) -> float:
        return self.x3 - self.y3

    def as_state(self) -> SState:
        return SState(self.x3, self.x, self.x, self.y3, self.y, self.y)


@dataclass(frozen=True)
class CoeffTable:
    """Coefficients c_ij of the curve polynomial sum_ij c_ij x3^i y3^j.

    Column j of `c` holds the coefficients of d_j(t) = sum_i c_ij t^i in
    ascending powers.
    """

    b: float
    c: np.ndarray = field(repr=False)

    @classmethod
    def for_rate(cls, b: float) -> "CoeffTable":
        if b < 0.0:
            raise ParameterError(f"mutation rate must be nonnegative, got {b}")
        c = np.empty((3, 3))
        c[2, 2] = -1.0
        c[1, 2] = c[2, 1] = 2.0
        c[0, 2] = c[2, 0] = -1.0
        c[1, 1] = -4.0 + 4.0 * b + 2.0 * b * b
        c[0, 1] = c[1, 0] = 2.0 - 4.0 * b + 2.0 * b * b
        c[0, 0] = -1.0 + 4.0 * b - 5.0 * b * b + 6.0 * b**3
        return cls(b=b, c=c)

    def _shifted(self, j: int) -> np.ndarray:
        # coefficients of t^j d_j(t)
        return np.concatenate((np.zeros(j), self.c[:, j]))

    def d(self, j: int, t: ArrayLike) -> ArrayLike:
        return P.polyval(t, self.c[:, j])

    def e(self, j: int, t: ArrayLike) -> ArrayLike:
        """e_j(t) = d/dt (t^j d_j(t))."""
        return P.polyval(t, P.polyder(self._shifted(j)))

    def e_prime(self, j: int, t: ArrayLike) -> ArrayLike:
        return P.polyval(t, P.polyder(self._shifted(j), 2))

    def polynomial(self, x3: ArrayLike, y3: ArrayLike) -> ArrayLike:
        return P.polyval2d(x3, y3, self.c)

    def gradient(self, x3: ArrayLike, y3: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        """Partial derivatives of the curve polynomial in x3 and y3."""
        return P.polyval2d(x3, y3, P.polyder(self.c, axis=0)), P.polyval2d(
            x3, y3, P.polyder(self.c, axis=1)
        )


@dataclass(frozen=True)
class StabilityReport:
    """Routh-Hurwitz data of the reduced 3x3 linearization."""

    trace: float
    det: float
    b2: float
    eigenvalues: Tuple[complex, complex, complex]
    rh_pass: Tuple[bool, bool, bool]

    @property
    def stable(self) -> bool:
        return all(self.rh_pass)

    @property
    def max_real(self) -> float:
        return max(ev.real for ev in self.eigenvalues)


@dataclass(frozen=True)
class LemmaCheck:
    name: str
    points: int
    min_margin: float
    violations: Tuple[float, ...]

    @property
    def holds(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class LemmaReport:
    b: float
    checks: Tuple[LemmaCheck, ...]
    symmetric_gap_ratio: float

    def check(self, name: str) -> LemmaCheck:
        for item in self.checks:
            if item.name == name:
                return item
        raise KeyError(name)


@dataclass(frozen=True)
class SymmetricAsymptotics:
    """Leading-order small-b predictions at the symmetric point x3 = y3."""

    x3: float
    x: float
    gap: float


def mean_fitness(s: SState) -> float:
    """w = x3 + y3 - x3 y3 + x1 y2 + x2 y1."""
    return s.x3 + s.y3 - s.x3 * s.y3 + s.x1 * s.y2 + s.x2 * s.y1


def fitness_array(state: np.ndarray) -> np.ndarray:
    x3, x2, x1, y3, y2, y1 = np.moveaxis(state, -1, 0)
    return x3 + y3 - x3 * y3 + x1 * y2 + x2 * y1


def field_array(state: np.ndarray, b: float) -> np.ndarray:
    """Vectorized field on arrays whose last axis is (x3, x2, x1, y3, y2, y1)."""
    x3, x2, x1, y3, y2, y1 = np.moveaxis(state, -1, 0)
    w = x3 + y3 - x3 * y3 + x1 * y2 + x2 * y1
    return np.stack(
        (
            x3 * (1.0 - 3.0 * b - w),
            -x2 * w + x2 * (y3 + y1) + b * x3 - 2.0 * b * x2,
            -x1 * w + x1 * (y3 + y2) + b * x3 - 2.0 * b * x1,
            y3 * (1.0 - 3.0 * b - w),
            -y2 * w + y2 * (x3 + x1) + b * y3 - 2.0 * b * y2,
            -y1 * w + y1 * (x3 + x2) + b * y3 - 2.0 * b * y1,
        ),
        axis=-1,
    )


def ode_field_s(s: SState, p: SubfuncParams) -> Tuple[float, ...]:
    """Deterministic rates (dx3, dx2, dx1, dy3, dy2, dy1)/dt."""
    return tuple(float(v) for v in field_array(s.as_array(), p.b))


def swap_genes(s: SState) -> SState:
    """Exchange the gene labels, pairing x2 with y1 and x1 with y2."""
    return SState(s.y3, s.y1, s.y2, s.x3, s.x1, s.x2)


@functools.lru_cache(maxsize=32)
def coeff_table(b: float) -> CoeffTable:
    return CoeffTable.for_rate(b)


def _y3_core(table: CoeffTable, t: np.ndarray) -> np.ndarray:
    d0, d1, d2 = table.d(0, t), table.d(1, t), table.d(2, t)
    disc = d1 * d1 - 4.0 * d0 * d2
    if np.any(disc < 0.0):
        raise DomainError(f"negative discriminant on the curve for b={table.b:g}")
    # d1 > 0 on the curve, so the product form avoids cancellation as y3 -> 0.
    return 2.0 * d0 / (-d1 - np.sqrt(disc))


def _y3_slope(table: CoeffTable, t: np.ndarray, y3: np.ndarray) -> np.ndarray:
    px, py = table.gradient(t, y3)
    return -px / py


def _check_x3(x3: ArrayLike, alpha: float) -> np.ndarray:
    t = np.asarray(x3, dtype=float)
    if np.any(np.isnan(t)) or np.any(t < -_EDGE_TOL) or np.any(t > alpha + _EDGE_TOL):
        raise DomainError(f"x3 must lie in [0, {alpha:.9g}]")
    return np.clip(t, 0.0, alpha)


def curve_y3_of_x3(x3: ArrayLike, p: SubfuncParams) -> ArrayLike:
    """y3 on the curve of equilibria as a function of x3.

    Returns the root of d0 + d1 y3 + d2 y3^2 = 0 with y3(0) = 1 - 3b.

    Raises:
        DomainError: If x3 lies outside [0, 1 - 3b] or the discriminant
            is negative.
    """
    t = _check_x3(x3, p.alpha)
    y3 = _y3_core(coeff_table(p.b), t)
    if np.ndim(x3) == 0:
        return float(y3)
    return y3


def curve_xy(x3: ArrayLike, y3: ArrayLike, p: SubfuncParams) -> Tuple[ArrayLike, ArrayLike]:
    """Frequencies x = x2 = x1 and y = y2 = y1 at a curve point."""
    x3a = np.asarray(x3, dtype=float)
    y3a = np.asarray(y3, dtype=float)
    beta = p.beta
    if np.any(np.abs(y3a - beta) < _EDGE_TOL) or np.any(np.abs(x3a - beta) < _EDGE_TOL):
        raise DomainError("curve point with x3 or y3 equal to 1 - b")
    gamma = 3.0 * p.b - (1.0 - x3a) * (1.0 - y3a)
    x = (gamma - 2.0 * p.b * x3a) / (2.0 * (y3a - beta))
    y = (gamma - 2.0 * p.b * y3a) / (2.0 * (x3a - beta))
    if np.ndim(x3) == 0 and np.ndim(y3) == 0:
        return float(x), float(y)
    return x, y


def equilibrium_at(x3: float, p: SubfuncParams) -> SEquilibrium:
    """Curve point with the given x3."""
    y3 = curve_y3_of_x3(x3, p)
    x, y = curve_xy(x3, y3, p)
    return SEquilibrium(float(np.clip(x3, 0.0, p.alpha)), y3, x, y, p.b)


def equilibrium_residuals(e: SEquilibrium) -> np.ndarray:
    """Residuals of the three fixed-point equations of the restricted system."""
    b, beta = e.b, 1.0 - e.b
    return np.array(
        [
            e.x3 + e.y3 - e.x3 * e.y3 + 2.0 * e.x * e.y - e.alpha,
            e.x * (e.y3 - beta) + e.x * e.y + b * e.x3,
            e.y * (e.x3 - beta) + e.x * e.y + b * e.y3,
        ]
    )


class EquilibriumCurve:
    """Tabulated curve of equilibria for one mutation rate.

    Chebyshev nodes in x3 over [0, 1 - 3b] feed monotone cubic interpolants
    of the inverse maps z -> x3 and y3/x3 -> x3; each lookup is polished by
    Newton steps on the exact curve polynomial.
    """

    def __init__(self, b: float, n_nodes: int = CURVE_NODES):
        if not 0.0 < b < 1.0 / 3.0:
            raise ParameterError(f"b must lie in (0, 1/3), got {b}")
        self.b = b
        self.alpha = 1.0 - 3.0 * b
        self.table = coeff_table(b)
        x3 = chebyshev_nodes(0.0, self.alpha, n_nodes)
        y3 = _y3_core(self.table, x3)
        self._x3_of_z = PchipInterpolator(x3 - y3, x3)
        inner = slice(1, -1)
        self._neg_log_ratio = -np.log(y3[inner] / x3[inner])
        self._x3_of_log = PchipInterpolator(self._neg_log_ratio, x3[inner])
        logger.debug("tabulated equilibrium curve b=%g on %d nodes", b, n_nodes)

    @property
    def interval(self) -> Tuple[float, float]:
        return -self.alpha, self.alpha

    def y3(self, x3: ArrayLike) -> np.ndarray:
        return _y3_core(self.table, _check_x3(x3, self.alpha))

    def slope(self, x3: ArrayLike) -> np.ndarray:
        """dy3/dx3 along the curve."""
        t = _check_x3(x3, self.alpha)
        return _y3_slope(self.table, t, _y3_core(self.table, t))

    def x3_of_z(self, z: ArrayLike, newton_steps: int = 3) -> np.ndarray:
        zz = np.asarray(z, dtype=float)
        if np.any(np.isnan(zz)) or np.any(np.abs(zz) > self.alpha):
            raise DomainError(f"|z| must not exceed {self.alpha:.9g}")
        t = np.clip(self._x3_of_z(zz), 0.0, self.alpha)
        for _ in range(newton_steps):
            y3 = _y3_core(self.table, t)
            f = t - y3 - zz
            t = np.clip(t - f / (1.0 - _y3_slope(self.table, t, y3)), 0.0, self.alpha)
        return t

    def x3_of_ratio(self, r: ArrayLike, newton_steps: int = 4) -> np.ndarray:
        """x3* with y3*/x3* = r, for r > 0."""
        rr = np.asarray(r, dtype=float)
        if np.any(~(rr > 0.0)) or np.any(np.isinf(rr)):
            raise ParameterError("ratio y3/x3 must be positive and finite")
        key = np.clip(-np.log(rr), self._neg_log_ratio[0], self._neg_log_ratio[-1])
        t = np.clip(self._x3_of_log(key), 0.0, self.alpha)
        for _ in range(newton_steps):
            y3 = _y3_core(self.table, t)
            f = y3 - rr * t
            t = np.clip(t - f / (_y3_slope(self.table, t, y3) - rr), 0.0, self.alpha)
        # Finish on the curve polynomial itself.
        for _ in range(2):
            value, slope = _quartic(self.table, rr, t)
            step = np.divide(value, slope, out=np.zeros_like(t), where=slope != 0.0)
            t = np.clip(t - step, 0.0, self.alpha)
        return t

    def z_grid(self, n: int) -> np.ndarray:
        """n curve coordinates spaced uniformly strictly inside the interval."""
        k = np.arange(1, n + 1)
        return -self.alpha + 2.0 * self.alpha * k / (n + 1)

    def points(self, n: int) -> List[SEquilibrium]:
        p = SubfuncParams(b=self.b)
        return [equilibrium_at(float(t), p) for t in self.x3_of_z(self.z_grid(n))]


@functools.lru_cache(maxsize=16)
def equilibrium_curve(b: float, n_nodes: int = CURVE_NODES) -> EquilibriumCurve:
    return EquilibriumCurve(b, n_nodes)


def _quartic(table: CoeffTable, r: ArrayLike, u: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """(r u)^2 d2(u) + r u d1(u) + d0(u) and its u-derivative."""
    value = (r * u) ** 2 * table.d(2, u) + r * u * table.d(1, u) + table.d(0, u)
    slope = r * r * table.e(2, u) + r * table.e(1, u) + table.e(0, u)
    return value, slope


def project_s(s: SState, p: SubfuncParams) -> SEquilibrium:
    """Curve point with the same ratio y3/x3 as s.

    Raises:
        ParameterError: If x3 or y3 is zero.
    """
    if s.x3 <= 0.0 or s.y3 <= 0.0:
        raise ParameterError("projection needs x3 > 0 and y3 > 0")
    r = s.y3 / s.x3
    table = coeff_table(p.b)
    alpha = p.alpha
    # y3(t) - r t decreases from alpha to -r alpha: a single bracketed root.
    u = brentq(lambda t: float(_y3_core(table, np.asarray(t))) - r * t, 0.0, alpha, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    for _ in range(2):
        value, slope = (float(v) for v in _quartic(table, r, u))
        if slope == 0.0 or value == 0.0:
            break
        u = min(max(u - value / slope, 0.0), alpha)
    return equilibrium_at(u, p)


def _derivs(table: CoeffTable, r: np.ndarray, u: np.ndarray):
    d1, d2 = table.d(1, u), table.d(2, u)
    e0, e1, e2 = table.e(0, u), table.e(1, u), table.e(2, u)
    num = 2.0 * r * u * u * d2 + u * d1
    den = r * r * e2 + r * e1 + e0
    if np.any(den == 0.0) or np.any(~np.isfinite(den)):
        raise SingularProjectionError("r^2 e2 + r e1 + e0 vanishes")
    du = -num / den
    num_r = 2.0 * u * u * d2 + (2.0 * r * e2 + e1) * du
    den_r = 2.0 * r * e2 + e1 + (r * r * table.e_prime(2, u) + r * table.e_prime(1, u) + table.e_prime(0, u)) * du
    d2u = -(num_r * den - num * den_r) / (den * den)
    return du, d2u


def projection_derivs(r: ArrayLike, p: SubfuncParams):
    """u = x3* as a function of r = y3/x3, with du/dr and d2u/dr2.

    The gene-exchanged parameter v(q), q = x3/y3, is the same function by
    symmetry, so `projection_derivs(q, p)` also gives (v, dv/dq, d2v/dq2).

    Raises:
        SingularProjectionError: If the derivative's denominator vanishes.
    """
    curve = equilibrium_curve(p.b)
    rr = np.asarray(r, dtype=float)
    u = curve.x3_of_ratio(rr)
    du, d2u = _derivs(curve.table, rr, u)
    if np.ndim(r) == 0:
        return float(u), float(du), float(d2u)
    return u, du, d2u


def limit_coeffs_s(
    z: ArrayLike,
    p: SubfuncParams,
    variance_mode: VarianceMode = "published",
):
    """Drift and variance of the limiting diffusion of x3* - y3*.

    With h(x3, y3) = u(y3/x3) - v(x3/y3), the returned drift is half of
    x3(1-x3) h_xx + y3(1-y3) h_yy evaluated at the curve point with
    coordinate z.

    Args:
        z: Curve coordinate(s) strictly inside (-(1 - 3b), 1 - 3b).
        p: Model parameters.
        variance_mode: "published" sums the quadratic variations of the two
            projected frequencies and is not the Ito variance of h; "exact"
            is grad(h)^T A grad(h).

    Returns:
        Tuple of (drift, variance), scalars or arrays matching z.

    Raises:
        ParameterError: If any |z| >= 1 - 3b.
    """
    zz = np.asarray(z, dtype=float)
    if np.any(np.isnan(zz)) or np.any(np.abs(zz) >= p.alpha):
        raise ParameterError(f"|z| must be below 1 - 3b = {p.alpha:.9g}")
    curve = equilibrium_curve(p.b)
    X = curve.x3_of_z(zz)
    Y = curve.y3(X)
    u1, u2 = _derivs(curve.table, Y / X, X)
    v1, v2 = _derivs(curve.table, X / Y, Y)
    var_x, var_y = X * (1.0 - X), Y * (1.0 - Y)

    twice_drift = (
        (u2 * Y**2 / X**4 + u1 * 2.0 * Y / X**3) * var_x
        + u2 * var_y / X**2
        - v2 * var_x / Y**2
        - (v2 * X**2 / Y**4 + v1 * 2.0 * X / Y**3) * var_y
    )
    if variance_mode == "published":
        variance = u1**2 * (Y**2 / X**4 * var_x + var_y / X**2) + v1**2 * (
            var_x / Y**2 + X**2 / Y**4 * var_y
        )
    elif variance_mode == "exact":
        dh_dx = -u1 * Y / X**2 - v1 / Y
        dh_dy = u1 / X + v1 * X / Y**2
        variance = var_x * dh_dx**2 + var_y * dh_dy**2
    else:
        raise ParameterError(f"unknown variance mode {variance_mode!r}")
    drift = 0.5 * twice_drift
    if np.ndim(z) == 0:
        return float(drift), float(variance)
    return drift, variance


def field_jacobian(s: SState, p: SubfuncParams) -> np.ndarray:
    """Jacobian of the field at any state, coordinates (x3, y3, x2, x1, y2, y1)."""
    b = p.b
    x3, x2, x1, y3, y2, y1 = s.as_array()
    w = mean_fitness(s)
    grad_w = np.array([1.0 - y3, 1.0 - x3, y1, y2, x1, x2])
    own = np.array(
        [
            [1.0 - 3.0 * b - w, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0 - 3.0 * b - w, 0.0, 0.0, 0.0, 0.0],
            [b, x2, y3 + y1 - 2.0 * b - w, 0.0, 0.0, x2],
            [b, x1, 0.0, y3 + y2 - 2.0 * b - w, x1, 0.0],
            [y2, b, 0.0, y2, x3 + x1 - 2.0 * b - w, 0.0],
            [y1, b, y1, 0.0, 0.0, x3 + x2 - 2.0 * b - w],
        ]
    )
    weights = np.array([x3, y3, x2, x1, y2, y1])
    return own - np.outer(weights, grad_w)


def jacobian6(e: SEquilibrium, p: SubfuncParams) -> np.ndarray:
    """Linearization of the field at a curve point."""
    return field_jacobian(e.as_state(), p)


def symmetric_block(e: SEquilibrium, p: SubfuncParams) -> np.ndarray:
    """Linearization on the invariant subspace x2 = x1, y2 = y1, coordinates (x3, y3, x, y)."""
    b = p.b
    x3, y3, x, y = e.x3, e.y3, e.x, e.y
    return np.array(
        [
            [-x3 * (1.0 - y3), -x3 * (1.0 - x3), -2.0 * x3 * y, -2.0 * x3 * x],
            [-y3 * (1.0 - y3), -y3 * (1.0 - x3), -2.0 * y3 * y, -2.0 * y3 * x],
            [-x * (1.0 - y3) + b, -x * (1.0 - x3) + x, -2.0 * x * y - b * x3 / x, -2.0 * x * x + x],
            [-y * (1.0 - y3) + y, -y * (1.0 - x3) + b, -2.0 * y * y + y, -2.0 * x * y - b * y3 / y],
        ]
    )


def basis_change(e: SEquilibrium) -> Tuple[np.ndarray, np.ndarray]:
    """(V, V^-1) removing the common multiple of grad(w) from the symmetric block."""
    x3, y3, x, y = e.x3, e.y3, e.x, e.y
    v = np.array(
        [
            [x3 / 2.0, x3 / 2.0, 0.0, 0.0],
            [-y3 / 2.0, y3 / 2.0, 0.0, 0.0],
            [x / 2.0, x / 2.0, 1.0, 0.0],
            [-y / 2.0, y / 2.0, 0.0, 1.0],
        ]
    )
    v_inv = np.array(
        [
            [1.0 / x3, -1.0 / y3, 0.0, 0.0],
            [1.0 / x3, 1.0 / y3, 0.0, 0.0],
            [-x / x3, 0.0, 1.0, 0.0],
            [0.0, -y / y3, 0.0, 1.0],
        ]
    )
    return v, v_inv


def reduced_matrices(e: SEquilibrium, p: SubfuncParams) -> Tuple[np.ndarray, np.ndarray]:
    """The 2x2 block on (0, 0, u, -u, v, -v) and the 3x3 transverse block M.

    Raises:
        DomainError: If x or y is zero.
    """
    if e.x <= 0.0 or e.y <= 0.0:
        raise DomainError("reduced matrices need x > 0 and y > 0")
    b = p.b
    x3, y3, x, y = e.x3, e.y3, e.x, e.y
    m2 = np.array([[-b * x3 / x, -x], [-y, -b * y3 / y]])
    m = np.array(
        [
            [-x3 * (1.0 - y3) - y3 * (1.0 - x3) - 4.0 * x * y, -4.0 * y, -4.0 * x],
            [x * (y3 + y) / 2.0, -b * x3 / x, x],
            [y * (x3 + x) / 2.0, y, -b * y3 / y],
        ]
    )
    return m2, m


def routh_hurwitz(e: SEquilibrium, p: SubfuncParams) -> StabilityReport:
    _, m = reduced_matrices(e, p)
    trace = float(np.trace(m))
    det = float(np.linalg.det(m))
    b2 = float(
        m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
        + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]
    )
    eigenvalues = tuple(complex(v) for v in np.linalg.eigvals(m))
    return StabilityReport(
        trace=trace,
        det=det,
        b2=b2,
        eigenvalues=eigenvalues,
        rh_pass=(trace < 0.0, det < 0.0, det - trace * b2 > 0.0),
    )


def symmetric_point(p: SubfuncParams) -> SEquilibrium:
    """The curve point with x3 = y3."""
    table = coeff_table(p.b)
    t = brentq(lambda v: float(_y3_core(table, np.asarray(v))) - v, 0.0, p.alpha, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return equilibrium_at(t, p)


def symmetric_point_asymptotics(b: float) -> SymmetricAsymptotics:
    """x3 ~ 1 - u sqrt(b), x ~ v sqrt(b) and y3(1 - x3) - x ~ ((u^2 + 1)/2u) sqrt(b).

    Here u = sqrt(2 + sqrt(5)) and v = (1 + sqrt(5)) / (2u).
    """
    root_b = np.sqrt(b)
    u = np.sqrt(2.0 + np.sqrt(5.0))
    v = (1.0 + np.sqrt(5.0)) / (2.0 * u)
    return SymmetricAsymptotics(
        x3=float(1.0 - u * root_b),
        x=float(v * root_b),
        gap=float((u * u + 1.0) / (2.0 * u) * root_b),
    )


def subfunctionalized_equilibrium(p: SubfuncParams, mirror: bool = False) -> SState:
    """Fixed point where gene 1 keeps function 1 and gene 2 keeps function 2.

    x2 = y1 = q with q(1 - q) = 2b and every other state absent; `mirror`
    gives the x1 = y2 = q counterpart.

    Raises:
        DomainError: If b > 1/8, where no such point exists.
    """
    disc = 1.0 - 8.0 * p.b
    if disc < 0.0:
        raise DomainError(f"no subfunctionalized equilibrium for b={p.b:g}")
    q = 0.5 * (1.0 + np.sqrt(disc))
    if mirror:
        return SState(0.0, 0.0, q, 0.0, q, 0.0)
    return SState(0.0, q, 0.0, 0.0, 0.0, q)


def _margin_check(name: str, z: np.ndarray, margins: np.ndarray) -> LemmaCheck:
    if margins.size == 0:
        return LemmaCheck(name, 0, float("nan"), ())
    bad = tuple(float(v) for v in z[margins <= 0.0])
    return LemmaCheck(name, int(margins.size), float(margins.min()), bad)


def verify_lemmas(p: SubfuncParams, grid_size: int = 200) -> LemmaReport:
    """Evaluate the stability inequalities on a grid of curve points.

    Checks, each with its smallest margin and the z values where it fails:
    `lemma2` bx3/x > y and by3/y > x; `det2` positivity of det(M2);
    `lemma3` det(M) > b2 trace(M); `trace` trace(M) < 0; and
    y3(1 - x3) >= x >= y on each half of the curve, `a1_x3_le_y3` and
    `a1_x3_ge_y3`. Violations are recorded, never raised.
    """
    curve = equilibrium_curve(p.b)
    z = curve.z_grid(grid_size)
    points = curve.points(grid_size)
    b = p.b

    lemma2, det2, lemma3, trace = [], [], [], []
    a1 = []
    for e in points:
        lemma2.append(min(b * e.x3 / e.x - e.y, b * e.y3 / e.y - e.x))
        det2.append(b * b * e.x3 * e.y3 / (e.x * e.y) - e.x * e.y)
        rep = routh_hurwitz(e, p)
        lemma3.append(rep.det - rep.b2 * rep.trace)
        trace.append(-rep.trace)
        a1.append(min(e.y3 * (1.0 - e.x3) - e.x, e.x - e.y))
    a1 = np.array(a1)
    lower = z <= 0.0

    sym = symmetric_point(p)
    ratio = (sym.y3 * (1.0 - sym.x3) - sym.x) / symmetric_point_asymptotics(b).gap

    checks = (
        _margin_check("lemma2", z, np.array(lemma2)),
        _margin_check("det2", z, np.array(det2)),
        _margin_check("lemma3", z, np.array(lemma3)),
        _margin_check("trace", z, np.array(trace)),
        _margin_check("a1_x3_le_y3", z[lower], a1[lower]),
        _margin_check("a1_x3_ge_y3", z[~lower], a1[~lower]),
    )
    for item in checks:
        if not item.holds:
            logger.info("%s fails at %d of %d points for b=%g", item.name, len(item.violations), item.points, b)
    return LemmaReport(b=b, checks=checks, symmetric_gap_ratio=float(ratio))
