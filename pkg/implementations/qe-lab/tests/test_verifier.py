# tests/test_verifier.py

import numpy as np
import pytest
from qelab.config import Settings
from qelab.errors import InadmissiblePointError, ParameterError
from qelab.schemas.run_config import Tolerances
from qelab.services import zoo
from qelab.services.geometry import ScalarField, linear_combination, product_field
from qelab.services.verifier import (
    eigenframe,
    eigenframe_from_ricci,
    einstein_scalar_roots,
    gradR_identity_residual,
    hessian_symmetry_residual,
    lapR_identity_residual,
    lemma1_residuals,
    qe_residual,
    qe_residual_norm,
    quotient_equation_residual,
    static_residual,
    trace_residual,
    traceless_residual,
    two_equal_gradient_residual,
    verify_einstein_scalar,
    verify_structure,
)


def test_flat_constant_residual_is_exactly_zero(euclid3):
    """Test u = 1 on flat space gives an exactly vanishing residual."""
    assert np.all(qe_residual(euclid3, [0.2, -1.0, 2.5]) == 0.0)
    assert trace_residual(euclid3, [0.0, 0.0, 0.0]) == 0.0


def test_perturbed_potential_residual(line_exp):
    """Test the residual of e^r(1 + eps sin r) at r = 0 is 2 eps."""
    eps = 1e-3
    def factor(t):
        e = np.exp(t)
        return e * np.sin(t), e * (np.sin(t) + np.cos(t)), 2.0 * e * np.cos(t)

    bump = product_field([(0, factor)], 1)
    u = linear_combination([line_exp.u, bump], [1.0, eps])
    perturbed = line_exp.with_potential(u)
    value = qe_residual_norm(perturbed, [0.0]).value
    assert value == pytest.approx(2.0 * eps, rel=1e-9)


def test_trace_is_trace_of_residual(thm1_iii):
    """Test the trace residual equals the metric trace of the full residual."""
    x = np.array([0.8, 0.4, -0.3])
    ginv = np.linalg.inv(thm1_iii.provider.metric(x))
    full = qe_residual(thm1_iii, x)
    expected = np.einsum("ij,ij->", ginv, full)
    assert trace_residual(thm1_iii, x) == pytest.approx(expected, abs=1e-12)


def test_traceless_residual_vanishes(case2_b):
    """Test the traceless part of the equation on hyperbolic space."""
    assert np.max(np.abs(traceless_residual(case2_b, [1.0, 1.0, 0.0]))) < 1e-10


def test_gradR_on_einstein_entry(case2_b):
    """Test the scalar curvature gradient identity cancels on hyperbolic space."""
    assert gradR_identity_residual(case2_b, [1.2, 1.0, 0.3]).normalized <= 1e-5


def test_gradR_on_rotational_model(thm1_iii):
    """Test the scalar curvature gradient identity on the non-Einstein (iii) model."""
    res = gradR_identity_residual(thm1_iii, [0.5, 0.0, 0.0])
    assert res.normalized <= 1e-5


@pytest.mark.parametrize("fixture", ["case2_b", "thm1_ii"])
def test_lapR(request, fixture):
    """Test the scalar curvature Laplacian identity."""
    s = request.getfixturevalue(fixture)
    for x in ([1.0, 1.0, 0.2], [2.0, 0.7, -1.0]):
        assert lapR_identity_residual(s, x).normalized <= 1e-4


def test_lapR_on_polar_hyperbolic_grid(case2_b):
    """Test the Laplacian identity on the corners of the polar hyperbolic chart."""
    for x in case2_b.grid(2):
        assert lapR_identity_residual(case2_b, x).normalized <= 1e-4
        assert gradR_identity_residual(case2_b, x).normalized <= 1e-5


def test_lapR_noise_estimate_on_rotational_model(thm1_iii):
    """Test the non-Einstein model carries a small error estimate for ΔR."""
    for x in thm1_iii.grid(2):
        res = lapR_identity_residual(thm1_iii, x)
        assert res.normalized <= 1e-4
        assert 0.0 < res.noise < 1e-4


def test_curvature_identities_need_three_dimensions(line_exp):
    """Test the scalar curvature identities reject 1D structures."""
    with pytest.raises(InadmissiblePointError):
        gradR_identity_residual(line_exp, [0.0])
    with pytest.raises(InadmissiblePointError):
        lapR_identity_residual(line_exp, [0.0])


def test_einstein_scalar_roots():
    """Test the admissible scalar curvatures of Einstein structures in dimension 3."""
    assert einstein_scalar_roots(3, 2.0, -4.0) == pytest.approx((-12.0, -6.0))


def test_einstein_scalar_on_hyperbolic_space(case2_b):
    """Test R = -6 matches the root 6 lambda / (m + 2)."""
    res = verify_einstein_scalar(case2_b, [1.0, 1.0, 0.0])
    assert res.value == pytest.approx(0.0, abs=1e-10)


def test_eigenframe_classification(case2_b, thm1_iii):
    """Test all-equal at an Einstein point and two-equal on the (iii) model."""
    assert eigenframe(case2_b, [1.0, 1.0, 0.0]).classification == "all-equal"
    frame = eigenframe(thm1_iii, [0.7, 0.2, 0.1])
    assert frame.classification == "two-equal"
    assert frame.equal_pair is not None


def test_eigenframe_of_distinct_spectrum():
    """Test a diagonal Ricci tensor on the flat metric gives the coordinate frame."""
    frame = eigenframe_from_ricci(np.diag([1.0, 2.0, 3.0]), np.eye(3))
    assert frame.classification == "distinct"
    np.testing.assert_allclose(frame.eigenvalues, [3.0, 2.0, 1.0])
    np.testing.assert_allclose(np.abs(frame.frame), np.eye(3)[:, ::-1], atol=1e-12)


@pytest.mark.parametrize("fixture", ["case2_a", "case2_b", "thm1_ii", "thm1_iii"])
def test_frame_identities(request, fixture):
    """Test the frame identities relating the Ricci derivative and du."""
    s = request.getfixturevalue(fixture)
    for x in s.grid(2):
        residuals, _ = lemma1_residuals(s, x)
        assert np.max(residuals) <= 1e-4


def test_two_equal_gradient(thm1_iii):
    """Test the quotient of two solutions is constant along equal eigen-directions."""
    u, other = thm1_iii.solutions
    res = two_equal_gradient_residual(u, other, thm1_iii, [1.0, 0.5, 0.2])
    assert res is not None
    assert res.normalized <= 1e-8


def test_quotient_of_proportional_solutions(case2_b):
    """Test the quotient equation vanishes for u2 = 3 u1."""
    u = case2_b.u
    res = quotient_equation_residual(
        u, u.scaled(3.0), case2_b, [1.0, 1.0, 0.0], [1, 0, 0], [0, 1, 1]
    )
    assert res.normalized <= 1e-12


def test_quotient_on_product(product_exp):
    """Test the quotient equation for e^r and cosh r along d/dr."""
    u1, u2 = product_exp.solutions
    res = quotient_equation_residual(
        u1, u2, product_exp, [0.3, -0.5, 0.7], [0, 0, 1], [0, 0, 1]
    )
    assert res.normalized <= 1e-10


def test_quotient_on_random_directions(thm1_iii):
    """Test the quotient equation for random directions on the (iii) model."""
    rng = np.random.default_rng(0)
    u1, u2 = thm1_iii.solutions
    for x in thm1_iii.box.sample(rng, 5):
        v, w = rng.standard_normal(3), rng.standard_normal(3)
        res = quotient_equation_residual(u1, u2, thm1_iii, x, v, w)
        assert res.normalized <= 1e-7


def test_static_residual_needs_m_one(case2_b):
    """Test the static equation is only evaluated for m = 1."""
    with pytest.raises(ParameterError):
        static_residual(case2_b, [1.0, 1.0, 0.0])


@pytest.mark.parametrize(
    "name,params",
    [
        ("euclid3", {}),
        ("table1-line-exp", {"m": 2}),
        ("table1-product-cosh", {"m": 2}),
        ("case2-a", {"m": 2}),
        ("case2-b", {"m": 2}),
        ("thm1-ii", {"m": 2}),
        ("thm1-iii", {"m": 2, "a": 1.5}),
    ],
)
def test_verify_structure_passes(name, params):
    """Test the full identity suite passes on zoo entries."""
    s = zoo.build(name, params)
    reports = verify_structure(s, s.grid(2), Tolerances())
    failed = [(r.identity, r.max_residual) for r in reports if not r.passed]
    assert not failed
    identities = {r.identity for r in reports}
    common = {"qe", "trace", "traceless", "hessian-symmetry", "mu-constancy"}
    assert common <= identities
    if s.dimension == 3:
        frame = {"gradR", "lapR", "frame-identities", "curvature-convention"}
        assert frame <= identities


FULL_GRID = Settings.model_fields["GRID_POINTS"].default


@pytest.mark.slow
@pytest.mark.parametrize(
    "name,params",
    [(entry.name, {}) for entry in zoo.list_catalog(dimension=3)]
    + [("thm1-iii", {"a": 1.5})],
)
def test_verify_structure_on_default_grid(name, params):
    """Test every 3D entry passes the identity suite on the default sample grid."""
    s = zoo.build(name, params)
    points = s.grid(FULL_GRID)
    assert len(points) == FULL_GRID**3
    reports = verify_structure(s, points, Tolerances())
    failed = [(r.identity, r.max_residual) for r in reports if not r.passed]
    assert not failed
    assert {"gradR", "lapR", "frame-identities"} <= {r.identity for r in reports}


@pytest.mark.slow
@pytest.mark.parametrize(
    "entry",
    [e for e in zoo.list_catalog() if e.dimension < 3],
    ids=lambda e: e.name,
)
def test_verify_structure_on_default_grid_low_dimension(entry):
    """Test the 1D and 2D entries pass on the default sample grid."""
    s = zoo.build(entry.name)
    reports = verify_structure(s, s.grid(FULL_GRID), Tolerances())
    assert not [(r.identity, r.max_residual) for r in reports if not r.passed]


def test_hessian_symmetry_residual_vanishes(thm1_iii):
    """Test the covariant Hessian of the (iii) potential is symmetric."""
    res = hessian_symmetry_residual(thm1_iii, [0.8, 0.4, -0.3])
    assert res.normalized <= 1e-8


def test_asymmetric_second_derivatives_fail_the_suite(euclid3):
    """Test skewed second derivatives of u are reported instead of averaged away."""
    skewed = ScalarField(
        eval=lambda x: 20.0 + x[0] * x[1],
        d_eval=lambda x: np.array([x[1], x[0], 0.0]),
        dd_eval=lambda x: np.array(
            [[0.0, 1.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]]
        ),
        positive=True,
        name="skewed",
    )
    s = euclid3.with_potential(skewed)
    res = hessian_symmetry_residual(s, [0.1, 0.2, 0.3])
    assert res.value == pytest.approx(0.25 * np.sqrt(2.0))
    points = np.array([[0.1, 0.2, 0.3]])
    reports = {r.identity: r for r in verify_structure(s, points)}
    assert not reports["hessian-symmetry"].passed


def test_verify_reports_perturbed_potential(line_exp):
    """Test a perturbed potential fails the equation."""
    bump = product_field([(0, lambda t: (t**3, 3.0 * t**2, 6.0 * t))], 1)
    s = line_exp.with_potential(linear_combination([line_exp.u, bump], [1.0, 1e-2]))
    reports = {r.identity: r for r in verify_structure(s, np.array([[0.5], [1.0]]))}
    assert not reports["qe"].passed
