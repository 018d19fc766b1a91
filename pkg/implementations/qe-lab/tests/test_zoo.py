# tests/test_zoo.py

import numpy as np
import pytest
from qelab.errors import ParameterError
from qelab.schemas.run_config import GridAxis, GridSpec
from qelab.services import zoo
from qelab.services.geometry import scalar_curvature
from qelab.services.verifier import mu_field, qe_residual_norm

CATALOG = [entry.name for entry in zoo.list_catalog()]


def test_catalog_contents():
    """Test the catalog lists the named examples."""
    assert len(CATALOG) >= 12
    for name in ("table1-line-exp", "thm1-iii", "besse-9118-a", "case2-b", "euclid3"):
        assert name in CATALOG


def test_catalog_dimension_filter():
    """Test filtering the catalog by dimension."""
    entries = zoo.list_catalog(3)
    assert entries
    assert all(e.dimension == 3 for e in entries)


def test_alias_resolves():
    """Test the product alias builds the exp entry."""
    assert zoo.build("table1-product").name == "table1-product-exp"


def test_line_exp_constants(line_exp):
    """Test the line with u = e^r has lambda = -m and mu = 0."""
    assert line_exp.lam == -2.0
    assert line_exp.mu_expected == 0.0
    assert line_exp.u.value(np.array([0.0])) == 1.0
    for r in (-1.0, 0.0, 2.0):
        assert mu_field(line_exp, [r]) == pytest.approx(0.0, abs=1e-12)


def test_line_cosh_constants():
    """Test the line with u = cosh r and m = 3 has lambda = -3 and mu = -2."""
    s = zoo.build("table1-line-cosh", m=3)
    assert s.lam == -3.0
    assert s.mu_expected == -2.0
    for r in (-1.0, 0.5, 2.5):
        assert mu_field(s, [r]) == pytest.approx(-2.0, abs=1e-12)


def test_case2_b_constants(case2_b):
    """Test the polar hyperbolic entry."""
    assert case2_b.lam == -4.0
    assert case2_b.einstein
    assert case2_b.u.value(np.array([1.0, 1.0, 0.0])) == pytest.approx(np.cosh(1.0))


def test_case2_a_mu(case2_a):
    """Test mu = 0 on the horospherical entry."""
    for x in ([0.0, 0.0, 0.0], [1.0, -2.0, 0.5]):
        assert mu_field(case2_a, x) == pytest.approx(0.0, abs=1e-10)


def test_thm1_ii_metric(thm1_ii):
    """Test the triple metric diag(1, f'^2, f^2) of the (ii) model."""
    prof = thm1_ii.profile
    f, fp, _, _ = prof.derivatives(0.5)
    g = thm1_ii.provider.metric(np.array([0.5, 0.0, 0.0]))
    np.testing.assert_allclose(np.diag(g), [1.0, fp * fp, f * f], rtol=1e-14)
    assert prof.ode.P(1.0) == pytest.approx(1.0 / 32.0)


def test_thm1_iii_special_case(hyperbolic_iii):
    """Test a = 1 gives b = 1, f = cosh t and an Einstein metric."""
    assert hyperbolic_iii.params["b"] == pytest.approx(1.0)
    g = hyperbolic_iii.provider.metric(np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(
        np.diag(g), [1.0, np.sinh(1.0) ** 2, np.cosh(1.0) ** 2], atol=1e-9
    )
    assert hyperbolic_iii.einstein
    assert hyperbolic_iii.expected_dim == 4


def test_thm1_iii_generic(thm1_iii):
    """Test a = 1.5 is not Einstein and has 1/b = P'(a)/2."""
    assert not thm1_iii.einstein
    # 1/b = (m+2)a/2 - m/(2a) with m = 2
    assert thm1_iii.params["b"] == pytest.approx(1.0 / (2.0 * 1.5 - 1.0 / 1.5))
    assert thm1_iii.params["b"] == pytest.approx(0.42857142857)


def test_einstein_base_scalar_curvature():
    """Test the hyperbolic surface with lambda = -2 has R = -4."""
    base = zoo.einstein_base("hyperbolic", -2.0)
    for x in ([0.0, 0.0], [1.3, -0.7]):
        assert scalar_curvature(base, x) == pytest.approx(-4.0)


def test_einstein_base_rejects_nonnegative_lambda():
    """Test lambda >= 0 is rejected."""
    with pytest.raises(ParameterError):
        zoo.einstein_base("hyperbolic", 0.0)


@pytest.mark.parametrize(
    "name,params",
    [
        ("thm1-iii", {"m": 1.0}),
        ("thm1-ii", {"m": 0.5}),
        ("thm1-iii", {"m": 2.0, "a": 0.5}),
        ("euclid3", {"lambda": 1.0}),
        ("table1-line-exp", {"q": 1.0}),
        ("thm1-i", {"fiber": "sinh"}),
        ("besse-9118-d", {"mu": 0.3}),
        ("no-such-entry", {}),
    ],
)
def test_invalid_parameters(name, params):
    """Test invalid names and parameters raise a parameter error."""
    with pytest.raises(ParameterError):
        zoo.build(name, params)


@pytest.mark.parametrize("name", CATALOG)
def test_zoo_soundness(name):
    """Test every entry solves the quasi-Einstein equation with constant mu."""
    s = zoo.build(name)
    points = s.grid(3)
    for x in points:
        assert qe_residual_norm(s, x).normalized <= 1e-8
    values = np.array([mu_field(s, x) for x in points])
    assert np.std(values) / (1.0 + abs(np.mean(values))) <= 1e-8
    if s.mu_expected is not None:
        atol = 1e-8 * (1.0 + abs(s.mu_expected))
        assert np.mean(values) == pytest.approx(s.mu_expected, abs=atol)


@pytest.mark.parametrize("name", CATALOG)
def test_known_solutions_solve_the_equation(name):
    """Test every listed closed-form solution solves the equation of its entry."""
    s = zoo.build(name)
    x = s.box.center
    for u in s.solutions:
        assert qe_residual_norm(s.with_potential(u), x).normalized <= 1e-8


def test_box_grid_is_lexicographic():
    """Test grid rows run over the last axis fastest."""
    box = zoo.Box(lo=(0.0, 0.0), hi=(1.0, 2.0))
    axes = [GridAxis(lo=0.0, hi=1.0, count=2), GridAxis(lo=0.0, hi=2.0, count=3)]
    grid = box.grid(GridSpec(axes=axes))
    np.testing.assert_allclose(grid, [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]])
    assert box.grid(4).shape == (16, 2)


def test_box_grid_rejects_wrong_axes():
    """Test an axis count different from the dimension is rejected."""
    box = zoo.Box(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0))
    with pytest.raises(ParameterError):
        box.grid(GridSpec(axes=[GridAxis(lo=0.0, hi=1.0, count=2)]))
