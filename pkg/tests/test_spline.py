import numpy as np
import pytest
from scipy.interpolate import BSpline
from scipy.linalg import lstsq, null_space

from dynmediation.errors import InsufficientPoints
from dynmediation.harness.spline import natural_spline_basis, quantile_knots, smooth_columns, smooth_trajectory


def _bspline_natural_fit(x, values, knots):
    """Fit in the B-spline basis with zero second derivative at both boundary knots."""
    t = np.concatenate([[knots[0]] * 3, knots, [knots[-1]] * 3])
    n_basis = len(t) - 4
    design = BSpline.design_matrix(x, t, 3).toarray()
    constraints = np.empty((2, n_basis))
    for i in range(n_basis):
        curvature = BSpline(t, np.eye(n_basis)[i], 3).derivative(2)
        constraints[:, i] = curvature([knots[0], knots[-1]])
    reduced = design @ null_space(constraints)
    coefficients, *_ = lstsq(reduced, values)
    return reduced @ coefficients


def test_linear_trajectories_are_reproduced():
    values = 0.5 - 0.2 * np.arange(26)
    np.testing.assert_allclose(smooth_trajectory(values), values, atol=1e-9)
    np.testing.assert_allclose(smooth_trajectory(np.full(10, 3.0), df=4), 3.0, atol=1e-10)


@pytest.mark.parametrize("df", [2, 4, 6])
def test_fit_matches_constrained_bspline_fit(df):
    rng = np.random.default_rng(df)
    values = np.sin(np.linspace(0, 3, 26)) + 0.1 * rng.normal(size=26)
    x = np.arange(26) / 25.0
    expected = _bspline_natural_fit(x, values, quantile_knots(x, df))
    np.testing.assert_allclose(smooth_trajectory(values, df), expected, atol=1e-8)


def test_basis_is_linear_beyond_boundary():
    knots = np.array([0.0, 0.3, 0.6, 1.0])
    outside = natural_spline_basis([1.5, 2.0, 2.5], knots)
    np.testing.assert_allclose(outside[0] - 2 * outside[1] + outside[2], 0.0, atol=1e-12)
    assert natural_spline_basis(np.linspace(0, 1, 5), knots).shape == (5, 4)


def test_knot_placement():
    np.testing.assert_allclose(quantile_knots(np.linspace(0, 1, 11), 3), [0.0, 0.5, 1.0])
    with pytest.raises(InsufficientPoints):
        quantile_knots(np.array([0.0, 0.0, 0.0, 0.0, 1.0]), 4)


def test_too_few_points():
    with pytest.raises(InsufficientPoints):
        smooth_trajectory(np.arange(5.0), df=6)
    with pytest.raises(InsufficientPoints):
        smooth_trajectory(np.arange(5.0), df=1)


def test_smooth_columns_shape():
    matrix = np.random.default_rng(0).normal(size=(12, 3))
    smoothed = smooth_columns(matrix, df=4)
    assert smoothed.shape == (12, 3)
    np.testing.assert_allclose(smoothed[:, 1], smooth_trajectory(matrix[:, 1], df=4))
