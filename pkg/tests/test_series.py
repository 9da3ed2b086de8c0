import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from minsurf.series import (
    SeriesError,
    TrigSeries3,
    cross,
    differentiate,
    evaluate,
    integrate_from_zero,
)

coef = st.floats(-2, 2, allow_nan=False, allow_infinity=False)


@st.composite
def series(draw, max_degree=4, slope=False):
    n = draw(st.integers(0, max_degree))
    c = draw(arrays(float, (n + 1, 3), elements=coef))
    s = draw(arrays(float, (n + 1, 3), elements=coef))
    a = draw(arrays(float, (3,), elements=coef)) if slope else np.zeros(3)
    return TrigSeries3(c, s, a)


ts = np.linspace(-3.0, 3.0, 41)
zs = np.array([0.3 + 0.2j, -1.1 + 0.7j, 2.0 - 0.4j, 0.0 + 1.0j])


def test_evaluate_matches_definition():
    s = TrigSeries3([[1, 2, 3], [0.5, 0, -1]], [[0, 0, 0], [0, 2, 0]], [0, 0, 1])
    t = 0.7
    expected = np.array([1 + 0.5 * np.cos(t), 2 + 2 * np.sin(t), 3 - np.cos(t) + t])
    np.testing.assert_allclose(s(t), expected, rtol=0, atol=1e-15)
    assert s(np.zeros((2, 5))).shape == (2, 5, 3)
    assert np.isrealobj(s(ts))


def test_complex_evaluation_is_the_analytic_continuation():
    s = TrigSeries3([[0, 0, 0], [1, 0, 0]], [[0, 0, 0], [0, 1, 0]])
    z = 0.4 + 0.9j
    np.testing.assert_allclose(s(z), [np.cos(z), np.sin(z), 0], rtol=0, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(series(slope=True), series(slope=True))
def test_addition_is_pointwise(a, b):
    np.testing.assert_allclose((a + b)(ts), a(ts) + b(ts), atol=1e-12)
    np.testing.assert_allclose((a - b)(zs), a(zs) - b(zs), atol=1e-11)


@settings(max_examples=60, deadline=None)
@given(series())
def test_integral_differentiates_back(s):
    integ = integrate_from_zero(s)
    assert differentiate(integ).allclose(s, atol=1e-13)
    np.testing.assert_allclose(integ(0.0), 0.0, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(series(slope=True))
def test_derivative_matches_finite_difference(s):
    h = 1e-5
    fd = (s(ts + h) - s(ts - h)) / (2 * h)
    np.testing.assert_allclose(differentiate(s)(ts), fd, atol=1e-7)


@settings(max_examples=60, deadline=None)
@given(series(), series())
def test_cross_product_is_pointwise(a, b):
    c = cross(a, b)
    assert c.degree == a.degree + b.degree
    np.testing.assert_allclose(c(ts), np.cross(a(ts), b(ts)), atol=1e-11)
    # holomorphic identities survive continuation off the real line
    np.testing.assert_allclose(c(zs), np.cross(a(zs), b(zs)), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(series(slope=True), arrays(float, (3,), elements=coef))
def test_cross_with_affine_term_against_constant(a, v):
    k = TrigSeries3.constant(v)
    np.testing.assert_allclose(cross(a, k)(ts), np.cross(a(ts), v), atol=1e-11)
    np.testing.assert_allclose(cross(k, a)(ts), np.cross(v, a(ts)), atol=1e-11)


def test_cross_rejects_affine_times_oscillating():
    a = TrigSeries3(np.zeros((1, 3)), np.zeros((1, 3)), [0, 0, 1])
    b = TrigSeries3([[0, 0, 0], [1, 0, 0]], np.zeros((2, 3)))
    with pytest.raises(SeriesError):
        cross(a, b)


def test_integrating_affine_term_is_rejected():
    with pytest.raises(SeriesError, match="affine"):
        integrate_from_zero(TrigSeries3(np.zeros((1, 3)), np.zeros((1, 3)), [1, 0, 0]))


def test_degree_cap():
    a = TrigSeries3(np.ones((5, 3)), np.zeros((5, 3)), max_degree=6)
    with pytest.raises(SeriesError, match="cap"):
        cross(a, a)
    with pytest.raises(SeriesError):
        TrigSeries3(np.ones((8, 3)), np.zeros((1, 3)), max_degree=6)


@settings(max_examples=40, deadline=None)
@given(series(slope=True))
def test_triples_round_trip(s):
    back = TrigSeries3.from_triples(s.to_triples(), s.slope)
    assert back == s


def test_from_triples_validation():
    with pytest.raises(SeriesError):
        TrigSeries3.from_triples([[[1, 1.0, 0.0]], []])
    with pytest.raises(SeriesError):
        TrigSeries3.from_triples([[[-1, 1.0, 0.0]], [], []])
    with pytest.raises(SeriesError):
        TrigSeries3.from_triples([[[1.5, 1.0, 0.0]], [], []])
    s = TrigSeries3.from_triples([[[0, 1.0, 9.0], [2, 0.5, 0.25]], [], [[1, 0.0, 1.0]]])
    np.testing.assert_allclose(s(0.3), [1 + 0.5 * np.cos(0.6) + 0.25 * np.sin(0.6), 0, np.sin(0.3)])


def test_series_is_immutable():
    s = TrigSeries3.constant([1, 2, 3])
    with pytest.raises(ValueError):
        s.cos[0, 0] = 5.0


def test_rigid_motion_of_series():
    from scipy.spatial.transform import Rotation

    R = Rotation.from_euler("xyz", [0.3, -0.2, 1.1]).as_matrix()
    s = TrigSeries3([[1, 0, 0], [0, 1, 0]], [[0, 0, 0], [0, 0, 1]], [0.5, 0, 0])
    np.testing.assert_allclose(s.rotate(R)(ts), s(ts) @ R.T, atol=1e-14)
    np.testing.assert_allclose(s.translate([1, 2, 3])(ts), s(ts) + [1, 2, 3], atol=1e-14)
