import warnings

import numpy as np
import pytest

from minsurf.bjorling import circle_with_contact_angle, helicoid_axis_input, solve, twisted_circle_input
from minsurf.diffgeo import (
    BoundaryNotLineOfCurvatureError,
    LoopResolutionError,
    NonCMCWarning,
    NonConformalError,
    boundary_rotation_index,
    cr_residual,
    find_umbilics,
    fundamental_forms,
    hopf_differential,
    hopf_identity_defect,
    line_field_from_hopf_values,
    HopfField,
    poincare_hopf_check,
    rectangle_loop,
    rotation_index,
)
from minsurf.surfaces import conformal_sphere, cylinder, normal_perturbation, plane_patch, sphere_cap, standard_catenoid


def _disk_grid(n=41, half=False):
    u = np.linspace(-1, 1, n)
    v = np.linspace(0 if half else -1, 1, n // 2 + 1 if half else n)
    U, V = np.meshgrid(u, v)
    return u, v, U + 1j * V


def test_sphere_curvatures():
    R = 2.0
    forms = fundamental_forms(sphere_cap(R, resolution=(65, 17)))
    # outward normal for this orientation is -X_u x X_v direction
    np.testing.assert_allclose(np.abs(forms.H), 1 / R, atol=1e-14)
    np.testing.assert_allclose(forms.K, 1 / R ** 2, atol=1e-14)
    k1, k2 = forms.principal_curvatures
    np.testing.assert_allclose(k1, k2, atol=1e-7)


def test_plane_and_cylinder_curvatures():
    f = fundamental_forms(plane_patch())
    assert np.all(f.L == 0) and np.all(f.M == 0) and np.all(f.N == 0)
    c = fundamental_forms(cylinder(radius=0.5, resolution=(33, 9)))
    np.testing.assert_allclose(np.abs(c.H), 1.0, atol=1e-14)
    np.testing.assert_allclose(c.K, 0.0, atol=1e-14)


def test_standard_catenoid_hopf_is_minus_one():
    forms = fundamental_forms(standard_catenoid(resolution=(65, 17)))
    hopf = hopf_differential(forms)
    np.testing.assert_allclose(hopf.phi, -1.0, atol=1e-14)
    assert hopf_identity_defect(forms, hopf) < 1e-13
    assert not hopf.umbilic.any()


@pytest.mark.parametrize("theta", [np.pi / 6, 1.0, np.pi / 2])
def test_bjorling_catenoid_hopf_is_constant(theta):
    forms = fundamental_forms(solve(circle_with_contact_angle(theta, resolution=(65, 17))))
    hopf = hopf_differential(forms)
    np.testing.assert_allclose(hopf.phi, -np.sin(theta), atol=1e-14)


def test_hopf_requires_isothermal_coordinates():
    with pytest.raises(NonConformalError, match="isothermal"):
        hopf_differential(fundamental_forms(sphere_cap(resolution=(33, 9))))


def test_conformal_sphere_is_totally_umbilic():
    hopf = hopf_differential(fundamental_forms(conformal_sphere(1.5, resolution=(65, 17))))
    assert hopf.totally_umbilic
    report = find_umbilics(hopf)
    assert report.totally_umbilic
    assert poincare_hopf_check(report).outcome == "totally-umbilic region"


def test_cr_residual_of_holomorphic_phi():
    hopf = hopf_differential(fundamental_forms(solve(helicoid_axis_input(resolution=(64, 17)))))
    np.testing.assert_allclose(hopf.phi, -1j, atol=1e-14)
    assert cr_residual(hopf) < 1e-12


def test_cr_residual_flags_non_cmc_patches():
    base = solve(twisted_circle_input(v_range=(-0.5, 0.5), resolution=(128, 33)))
    bumped = normal_perturbation(base, 1e-3, seed=5)
    forms = fundamental_forms(bumped)
    hopf = hopf_differential(forms, conformal_tol=1e-1)
    clean = cr_residual(hopf_differential(fundamental_forms(base)))
    with pytest.warns(NonCMCWarning):
        bumped_res = cr_residual(hopf)
    assert bumped_res > 100 * clean


def test_index_of_linear_differential():
    u, v, w = _disk_grid()
    field = line_field_from_hopf_values(u, v, w)
    idx = rotation_index(field, rectangle_loop(10, 30, 10, 30))
    assert idx.value == -0.5 and idx.quantization_error < 0.05


def test_index_of_conjugate_and_quadratic():
    u, v, w = _disk_grid()
    assert rotation_index(line_field_from_hopf_values(u, v, np.conj(w)),
                          rectangle_loop(10, 30, 10, 30)).value == 0.5
    assert rotation_index(line_field_from_hopf_values(u, v, w ** 2),
                          rectangle_loop(10, 30, 10, 30)).value == -1.0
    assert rotation_index(line_field_from_hopf_values(u, v, np.ones_like(w)),
                          rectangle_loop(10, 30, 10, 30)).value == 0.0


def test_loop_through_umbilic_is_refused():
    u, v, w = _disk_grid()
    field = line_field_from_hopf_values(u, v, w)
    with pytest.raises(LoopResolutionError):
        rotation_index(field, rectangle_loop(20, 25, 20, 25))
    with pytest.raises(LoopResolutionError):
        rectangle_loop(3, 3, 0, 4)


def test_boundary_index_by_doubling():
    u, v, w = _disk_grid(half=True)
    field = line_field_from_hopf_values(u, v, w)
    idx = boundary_rotation_index(field, 20, "v_min")
    assert idx.value == -0.25


def test_boundary_index_needs_line_of_curvature():
    u, v, w = _disk_grid(half=True)
    field = line_field_from_hopf_values(u, v, np.exp(0.3j) * w)
    with pytest.raises(BoundaryNotLineOfCurvatureError, match="line of curvature"):
        boundary_rotation_index(field, 20, "v_min")


def test_umbilic_search_on_disk():
    u, v, w = _disk_grid()
    hopf = HopfField.from_values(u, v, w - 0.1 + 0.05j, topology="disk")
    report = find_umbilics(hopf)
    assert len(report.umbilics) == 1
    p = report.umbilics[0]
    assert abs(p.u - 0.1) < 0.06 and abs(p.v + 0.05) < 0.06
    assert p.index == -0.5
    ph = poincare_hopf_check(report)
    assert not ph.passed and ph.defect == pytest.approx(1.5)


def test_two_umbilics_sum():
    u, v, w = _disk_grid(61)
    hopf = HopfField.from_values(u, v, (w - 0.4) * (w + 0.4), topology="disk")
    report = find_umbilics(hopf)
    assert sorted(round(p.u, 1) for p in report.umbilics) == [-0.4, 0.4]
    assert report.index_sum == -1.0


def test_catenoid_annulus_poincare_hopf():
    hopf = hopf_differential(fundamental_forms(solve(circle_with_contact_angle(1.0, resolution=(128, 33)))))
    report = find_umbilics(hopf)
    assert report.umbilics == [] and report.skipped_edges == []
    ph = poincare_hopf_check(report)
    assert ph.passed and ph.index_sum == 0 and ph.euler_characteristic == 0


def test_edges_that_are_not_lines_of_curvature_are_skipped():
    hopf = hopf_differential(fundamental_forms(solve(twisted_circle_input(v_range=(-0.5, 0.5),
                                                                          resolution=(128, 33)))))
    report = find_umbilics(hopf)
    assert set(report.skipped_edges) == {"v_min", "v_max"}


def test_degenerate_immersion():
    from minsurf.diffgeo import DegenerateImmersionError
    from minsurf.patch import SurfacePatch

    u = np.linspace(0, 1, 4)
    v = np.linspace(0, 1, 4)
    X = np.zeros((4, 4, 3))
    X[..., 0] = u[None, :]
    with pytest.raises(DegenerateImmersionError, match="degenerate"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fundamental_forms(SurfacePatch.from_positions(u, v, X))
