"""Small numeric helpers shared across the models.

Output formatting lives here too: every float written to CSV goes through
`fmt_sig` so tables are locale-free and stable to 9 significant digits.
"""

from typing import Callable, Union

import numpy as np

Number = Union[int, float, np.floating]

SIG_DIGITS = 9


def fmt_sig(value: Number, digits: int = SIG_DIGITS) -> str:
    """Format a number with a fixed count of significant digits.

    Args:
        value: Number to format. Booleans and integers are written as-is.
        digits: Significant digits for floats.

    Returns:
        str: Text representation suitable for CSV output.
    """
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if value == 0.0:
        return "0"
    if not np.isfinite(value):
        return "nan" if np.isnan(value) else ("inf" if value > 0 else "-inf")
    return f"{value:.{digits}g}"


def chebyshev_nodes(a: float, b: float, n: int) -> np.ndarray:
    """Return n Chebyshev-Lobatto nodes on [a, b], ascending, endpoints included."""
    k = np.arange(n)
    t = -np.cos(np.pi * k / (n - 1))
    return 0.5 * (a + b) + 0.5 * (b - a) * t


def graded_nodes(a: float, b: float, n: int, offset: float = 0.0) -> np.ndarray:
    """Chebyshev-Lobatto nodes on [a + offset, b - offset].

    Clustering at both ends resolves the steep behaviour of diffusion
    coefficients near absorbing boundaries.
    """
    return chebyshev_nodes(a + offset, b - offset, n)


def central_diff(f: Callable[[float], float], x: float, h: float) -> float:
    """Second-order central difference f'(x)."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


def central_diff2(f: Callable[[float], float], x: float, h: float) -> float:
    """Second-order central difference f''(x)."""
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)


def rk4_step(field: Callable[[np.ndarray], np.ndarray], y: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of an autonomous field."""
    k1 = field(y)
    k2 = field(y + 0.5 * dt * k1)
    k3 = field(y + 0.5 * dt * k2)
    k4 = field(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def fd_jacobian(field: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector field at y."""
    y = np.asarray(y, dtype=float)
    cols = []
    for j in range(y.size):
        e = np.zeros_like(y)
        e[j] = h
        cols.append((np.asarray(field(y + e)) - np.asarray(field(y - e))) / (2.0 * h))
    return np.column_stack(cols)
