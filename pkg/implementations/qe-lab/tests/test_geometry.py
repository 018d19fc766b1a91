# tests/test_geometry.py

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError
from qelab.errors import DegenerateMetricError, InadmissiblePointError
from qelab.schemas.geometry import ChartPoint
from qelab.services.geometry import (
    MetricProvider,
    ScalarField,
    christoffel,
    covariant_ricci_derivative,
    curvature,
    diagonal_product_metric,
    gradient_norm,
    hessian,
    hessian_asymmetry,
    laplacian,
    linear_combination,
    metric_compatibility_defect,
    product_field,
    riemann,
    riemann_from_ricci_3d,
    round_sphere_3d,
    scalar_curvature,
    scalar_curvature_jet,
    sectional_curvature,
)


def test_euclidean_christoffel_vanishes(euclid3):
    """Test the Christoffel symbols of the flat metric are zero."""
    assert np.all(christoffel(euclid3.provider, [0.3, -1.2, 2.0]) == 0.0)


def test_horospherical_christoffel(case2_a):
    """Test the Christoffel symbols of dr^2 + e^{2r}(dx^2 + dy^2) at r = 0."""
    gamma = christoffel(case2_a.provider, [0.0, 0.4, -0.7])
    assert gamma[0, 1, 1] == pytest.approx(-1.0)
    assert gamma[0, 2, 2] == pytest.approx(-1.0)
    assert gamma[1, 0, 1] == pytest.approx(1.0)
    assert gamma[1, 1, 0] == pytest.approx(1.0)
    assert gamma[0, 0, 0] == 0.0


def test_polar_christoffel(case2_b):
    """Test the polar chart of hyperbolic space gives coth(1) at r = 1."""
    gamma = christoffel(case2_b.provider, [1.0, 1.0, 0.5])
    assert gamma[1, 0, 1] == pytest.approx(1.0 / np.tanh(1.0), rel=1e-12)
    assert gamma[1, 0, 1] == pytest.approx(1.3130, abs=1e-4)


@pytest.mark.parametrize("point", [[0.5, 0.8, 0.0], [1.0, 1.5, -2.0], [2.5, 2.9, 1.0]])
def test_hyperbolic_ricci(case2_b, point):
    """Test Ric = -2g and R = -6 on hyperbolic space."""
    bundle = curvature(case2_b.provider, point)
    np.testing.assert_allclose(bundle.ricci, -2.0 * bundle.metric, atol=1e-10)
    assert bundle.scalar == pytest.approx(-6.0, abs=1e-10)


def test_horospherical_ricci(case2_a):
    """Test the horospherical metric is Einstein with R = -6."""
    bundle = curvature(case2_a.provider, [0.7, 0.1, 0.2])
    np.testing.assert_allclose(bundle.ricci, -2.0 * bundle.metric, atol=1e-10)
    assert scalar_curvature(case2_a.provider, [-0.3, 1.0, 0.0]) == pytest.approx(-6.0)


def test_hessian_of_constant_is_zero(case2_b):
    """Test a constant function has zero Hessian."""
    one = product_field([], 3, name="1")
    assert np.all(hessian(case2_b.provider, one, [1.0, 1.0, 0.0]) == 0.0)


def test_hessian_of_cosh_on_hyperbolic_space(case2_b):
    """Test the Hessian of cosh r is cosh r times the metric."""
    x = [1.3, 0.9, 0.4]
    h = hessian(case2_b.provider, case2_b.u, x)
    g = case2_b.provider.metric(np.array(x))
    np.testing.assert_allclose(h, np.cosh(1.3) * g, atol=1e-12)
    lap = laplacian(case2_b.provider, case2_b.u, x)
    assert lap == pytest.approx(3.0 * np.cosh(1.3))


def test_hessian_on_the_line(line_exp):
    """Test the Hessian of e^r on the line."""
    h = hessian(line_exp.provider, line_exp.u, [0.5])
    assert h[0, 0] == pytest.approx(np.exp(0.5))


def test_laplacian_of_square(euclid3):
    """Test the Laplacian of x^2 on flat space is 2."""
    square = product_field([(0, lambda t: (t * t, 2.0 * t, 2.0))], 3, name="x^2")
    assert laplacian(euclid3.provider, square, [1.2, -0.4, 2.0]) == pytest.approx(2.0)


def test_gradient_norm_on_hyperbolic_space(case2_b):
    """Test |grad cosh r| = sinh r."""
    norm = gradient_norm(case2_b.provider, case2_b.u, [0.8, 1.0, 0.0])
    assert norm == pytest.approx(np.sinh(0.8))


def test_ricci_decomposition_of_flat_space():
    """Test vanishing Ricci data rebuilds a vanishing curvature tensor."""
    assert np.all(riemann_from_ricci_3d(np.zeros((3, 3)), 0.0, np.eye(3)) == 0.0)


def test_ricci_decomposition_on_hyperbolic_space(case2_b):
    """Test the rebuilt curvature has sectional curvature -1 and matches."""
    x = np.array([1.1, 1.2, 0.3])
    bundle = curvature(case2_b.provider, x, with_riemann=True)
    rebuilt = riemann_from_ricci_3d(bundle.ricci, bundle.scalar, bundle.metric)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        k = sectional_curvature(rebuilt, bundle.metric, i, j)
        assert k == pytest.approx(-1.0, abs=1e-10)
    np.testing.assert_allclose(rebuilt, bundle.riemann, atol=1e-9)
    contracted = np.einsum("ca,cbad->bd", bundle.inverse, rebuilt)
    np.testing.assert_allclose(contracted, bundle.ricci, atol=1e-10)


def test_ricci_decomposition_rejects_other_dimensions():
    """Test the 3D decomposition refuses 2x2 input."""
    with pytest.raises(InadmissiblePointError):
        riemann_from_ricci_3d(np.zeros((2, 2)), 0.0, np.eye(2))


@pytest.mark.parametrize("fixture", ["case2_a", "case2_b"])
def test_ricci_is_parallel_on_einstein_metrics(request, fixture):
    """Test the covariant derivative of Ricci vanishes on Einstein metrics."""
    s = request.getfixturevalue(fixture)
    estimate = covariant_ricci_derivative(s.provider, [1.0, 1.0, 0.5])
    assert np.max(np.abs(estimate.value)) <= 1e-5
    assert estimate.error < 1e-3


def _gaussian_surface():
    """``dr^2 + exp(r^2) dth^2``, whose scalar curvature is ``-2(1 + r^2)``."""

    def factor(t):
        e = np.exp(t * t)
        return e, 2.0 * t * e, (2.0 + 4.0 * t * t) * e

    return diagonal_product_metric([[], [(0, factor)]], name="gaussian-surface")


@pytest.mark.parametrize("r", [0.2, 0.7, 1.5])
def test_scalar_curvature_jet_matches_closed_form(r):
    """Test ∂R = (-4r, 0) and ΔR = -4 - 4r^2 on the Gaussian surface."""
    jet = scalar_curvature_jet(_gaussian_surface(), [r, 0.3])
    np.testing.assert_allclose(jet.gradient, [-4.0 * r, 0.0], atol=1e-7)
    assert jet.laplacian == pytest.approx(-4.0 - 4.0 * r * r, abs=1e-6)
    assert jet.laplacian_error < 1e-5


def test_scalar_curvature_jet_is_flat_on_constant_curvature(case2_b):
    """Test the jet of R = -6 in polar coordinates stays near zero."""
    jet = scalar_curvature_jet(case2_b.provider, [1.2, 1.0, 0.3])
    assert np.max(np.abs(jet.gradient)) < 1e-7
    assert abs(jet.laplacian) < 1e-5


def test_hessian_keeps_its_antisymmetric_part(euclid3):
    """Test skewed second derivatives reach the covariant Hessian unchanged."""
    skewed = ScalarField(
        eval=lambda x: x[0] * x[1],
        d_eval=lambda x: np.array([x[1], x[0], 0.0]),
        dd_eval=lambda x: np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
    )
    h = hessian(euclid3.provider, skewed, [0.5, 0.5, 0.5])
    assert h[0, 1] == 1.0
    assert h[1, 0] == 0.0
    assert hessian_asymmetry(h, np.eye(3)) == pytest.approx(0.5 * np.sqrt(2.0))


def test_metric_compatibility(thm1_iii):
    """Test the connection is metric on a numerically integrated warped product."""
    assert metric_compatibility_defect(thm1_iii.provider, [1.0, 0.3, -0.2]) < 1e-12


def test_degenerate_metric_raises():
    """Test an indefinite metric is rejected."""
    provider = MetricProvider(
        dimension=2, eval=lambda x: np.diag([1.0, -1.0]), name="lorentz"
    )
    with pytest.raises(DegenerateMetricError):
        curvature(provider, [0.0, 0.0])


def test_inadmissible_point_raises(case2_b):
    """Test points outside the polar chart are rejected."""
    with pytest.raises(InadmissiblePointError):
        curvature(case2_b.provider, [-1.0, 1.0, 0.0])
    with pytest.raises(InadmissiblePointError):
        curvature(case2_b.provider, [1.0, 1.0])


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-3.0, 3.0),
    b=st.floats(-3.0, 3.0),
    r=st.floats(0.3, 2.5),
    theta=st.floats(0.3, 2.8),
)
def test_hessian_is_linear(case2_b, a, b, r, theta):
    """Test the Hessian is linear in the function."""
    u1, u2 = case2_b.solutions[0], case2_b.solutions[1]
    combo = linear_combination([u1, u2], [a, b])
    x = [r, theta, 0.4]
    p = case2_b.provider
    expected = a * hessian(p, u1, x) + b * hessian(p, u2, x)
    np.testing.assert_allclose(hessian(p, combo, x), expected, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(psi=st.floats(0.3, 2.8), theta=st.floats(0.3, 2.8), phi=st.floats(-3.0, 3.0))
def test_curvature_symmetries(psi, theta, phi):
    """Test antisymmetry and pair symmetry of the round sphere curvature tensor."""
    rm = riemann(round_sphere_3d(), [psi, theta, phi])
    np.testing.assert_allclose(rm, -np.swapaxes(rm, 0, 1), atol=1e-9)
    np.testing.assert_allclose(rm, -np.swapaxes(rm, 2, 3), atol=1e-9)
    np.testing.assert_allclose(rm, np.transpose(rm, (2, 3, 0, 1)), atol=1e-9)


def test_chart_points_are_accepted(case2_b):
    """Test operations take validated chart points as well as arrays."""
    p = ChartPoint(coords=(1.0, 1.0, 0.5), chart_id="case2-b")
    assert p.dimension == 3
    assert scalar_curvature(case2_b.provider, p) == pytest.approx(-6.0)


@pytest.mark.parametrize("coords", [(), (1.0, float("nan")), (0.0,) * 5])
def test_chart_point_validation(coords):
    with pytest.raises(ValidationError):
        ChartPoint(coords=coords)
