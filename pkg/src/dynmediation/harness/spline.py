"""Natural cubic regression splines over the stage index."""
from __future__ import annotations

import numpy as np
from scipy import linalg

from dynmediation.errors import InsufficientPoints


def quantile_knots(x: np.ndarray, df: int) -> np.ndarray:
    """``df`` knots at evenly spaced quantiles of ``x``, boundary knots included."""
    knots = np.quantile(x, np.linspace(0.0, 1.0, df))
    if np.unique(knots).size != df:
        raise InsufficientPoints(f"{df} distinct knots cannot be placed on {np.unique(x).size} distinct points")
    return knots


def natural_spline_basis(x, knots) -> np.ndarray:
    """Truncated-power basis of the natural cubic splines with ``knots``.

    Columns are 1, x and d_k(x) - d_{K-1}(x) for k = 1..K-2 with
    d_k(x) = ((x - xi_k)_+^3 - (x - xi_K)_+^3) / (xi_K - xi_k); the
    fit is linear beyond the boundary knots.
    """
    x = np.asarray(x, dtype=float)
    knots = np.asarray(knots, dtype=float)
    K = knots.size
    if K < 2:
        raise InsufficientPoints("a natural spline needs at least 2 knots")

    def d(k: int) -> np.ndarray:
        return (
            np.maximum(x - knots[k], 0.0) ** 3 - np.maximum(x - knots[-1], 0.0) ** 3
        ) / (knots[-1] - knots[k])

    columns = [np.ones_like(x), x]
    last = d(K - 2)
    columns.extend(d(k) - last for k in range(K - 2))
    return np.column_stack(columns)


def smooth_trajectory(values, df: int = 6) -> np.ndarray:
    """Least-squares natural cubic spline fit of ``values`` against stages 1..T."""
    values = np.asarray(values, dtype=float)
    T = values.shape[0]
    if df < 2:
        raise InsufficientPoints(f"df must be >= 2, got {df}")
    if T < df:
        raise InsufficientPoints(f"{T} points cannot support a spline with df={df}")
    # stage index rescaled to [0, 1]
    x = np.arange(T, dtype=float) / max(T - 1, 1)
    basis = natural_spline_basis(x, quantile_knots(x, df))
    coefficients, *_ = linalg.lstsq(basis, values)
    return basis @ coefficients


def smooth_columns(matrix, df: int = 6) -> np.ndarray:
    """Smooth each column of a [T, d] array."""
    matrix = np.asarray(matrix, dtype=float)
    return np.column_stack([smooth_trajectory(matrix[:, j], df) for j in range(matrix.shape[1])])
