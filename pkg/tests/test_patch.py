import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from minsurf.bjorling import circle_with_contact_angle, solve
from minsurf.patch import (
    FINITE_DIFFERENCE,
    PatchError,
    SurfacePatch,
    difference_matrix,
    fornberg_weights,
)
from minsurf.surfaces import sphere_cap


def test_fornberg_recovers_classic_stencils():
    w = fornberg_weights(0.0, np.array([-1.0, 0.0, 1.0]), 2)
    np.testing.assert_allclose(w[:, 1], [-0.5, 0, 0.5], atol=1e-15)
    np.testing.assert_allclose(w[:, 2], [1, -2, 1], atol=1e-15)


def test_difference_matrix_is_exact_on_polynomials():
    x = np.sort(np.random.default_rng(0).uniform(0, 1, 20))
    D = difference_matrix(x, 1)
    np.testing.assert_allclose(D @ x ** 5, 5 * x ** 4, atol=1e-8)
    D2 = difference_matrix(x, 2)
    np.testing.assert_allclose(D2 @ x ** 3, 6 * x, atol=1e-6)


def test_finite_difference_patch_matches_analytic():
    exact = solve(circle_with_contact_angle(1.0, v_range=(-1, 1), resolution=(128, 65)))
    fd = SurfacePatch.from_positions(exact.u, exact.v, exact.X)
    assert fd.periodic and fd.provenance == FINITE_DIFFERENCE
    # spectral in the periodic direction, 9-point stencils across it
    for name, atol in (("Xu", 1e-12), ("Xuu", 1e-10), ("Xv", 1e-10), ("Xuv", 1e-9), ("Xvv", 1e-9)):
        np.testing.assert_allclose(getattr(fd, name), getattr(exact, name), atol=atol)


def test_points_drop_the_seam():
    p = sphere_cap(resolution=(17, 5))
    assert p.points.shape == (16 * 5, 3)


def test_grid_validation():
    u = np.linspace(0, 1, 4)
    v = np.linspace(0, 1, 3)
    with pytest.raises(PatchError, match="shape"):
        SurfacePatch.from_positions(u, v, np.zeros((4, 3, 3)))
    with pytest.raises(PatchError, match="increasing"):
        SurfacePatch.from_positions(u[::-1], v, np.zeros((3, 4, 3)))
    with pytest.raises(PatchError, match="at least 2"):
        SurfacePatch.from_positions(u, v[:1], np.zeros((1, 4, 3)))
    with pytest.raises(PatchError, match="unknown edge"):
        SurfacePatch.from_positions(u, v, np.random.default_rng(0).normal(size=(3, 4, 3))).edge("top")


def test_spline_evaluation_without_evaluator():
    exact = solve(circle_with_contact_angle(1.0, v_range=(-1, 1), resolution=(128, 65)))
    fd = SurfacePatch.from_positions(exact.u, exact.v, exact.X)
    u = np.array([0.05, 3.3, 6.2, 6.3])
    v = np.array([0.0, -0.45, 0.77, 0.1])
    X, Xu, Xv = fd.evaluate(u, v)
    Xe, Xue, Xve = exact.evaluate(u, v)
    np.testing.assert_allclose(X, Xe, atol=1e-9)
    np.testing.assert_allclose(Xu, Xue, atol=1e-6)
    np.testing.assert_allclose(Xv, Xve, atol=1e-6)


def test_rigid_transform_carries_derivatives_and_evaluator():
    p = solve(circle_with_contact_angle(1.0, resolution=(32, 9)))
    R = Rotation.from_rotvec([0.2, -0.5, 0.9]).as_matrix()
    t = np.array([1.0, -2.0, 0.5])
    q = p.transformed(R, t, scale=2.0)
    np.testing.assert_allclose(q.X, 2 * p.X @ R.T + t, atol=1e-14)
    np.testing.assert_allclose(q.Xvv, 2 * p.Xvv @ R.T, atol=1e-14)
    X, Xu, _ = q.evaluate(np.array([0.4]), np.array([0.2]))
    X0, Xu0, _ = p.evaluate(np.array([0.4]), np.array([0.2]))
    np.testing.assert_allclose(X, 2 * X0 @ R.T + t, atol=1e-14)
    np.testing.assert_allclose(q.diameter, 2 * p.diameter, rtol=1e-14)
