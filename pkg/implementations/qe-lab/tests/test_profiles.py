# tests/test_profiles.py

import csv

import numpy as np
import pytest
from qelab.errors import InadmissiblePointError, IntegrationError, ParameterError
from qelab.services.profiles import (
    FAMILIES,
    ProfileODE,
    fiber_solution,
    integrate_profile,
    lambda_of_family,
    mu_of_family,
    profile_ode,
)


def test_cosh_profile(cosh_profile):
    """Test the degenerate start P = f^2 - 1 reproduces cosh t."""
    assert cosh_profile.evaluate(1.0) == pytest.approx(1.5430806348, abs=1e-9)
    for t in np.linspace(0.0, 3.0, 31):
        assert cosh_profile.evaluate(t) == pytest.approx(np.cosh(t), abs=1e-9)


def test_cosh_profile_is_even(cosh_profile):
    """Test the degenerate family extends by reflection."""
    f, fp, fpp, fppp = cosh_profile.derivatives(-0.7)
    assert f == pytest.approx(np.cosh(0.7), abs=1e-9)
    assert fp == pytest.approx(-np.sinh(0.7), abs=1e-9)
    assert fpp == pytest.approx(np.cosh(0.7), abs=1e-9)
    assert fppp == pytest.approx(-np.sinh(0.7), abs=1e-9)


def test_initial_slope_of_thm1_ii(thm1_ii_profile):
    """Test f'(0) = sqrt(P(1)) = sqrt(1/32) for m = 2."""
    slope = thm1_ii_profile.derivatives(0.0)[1]
    assert slope == pytest.approx(np.sqrt(1.0 / 32.0), abs=1e-12)
    assert slope == pytest.approx(0.17677670, abs=1e-8)


# f(1) for thm1-ii with m = 2. With w = f^2 the profile equation becomes
# w' = 2 sqrt(w^2 - w + 1/32), w(0) = 1, so w(t) = 1/2 + k cosh(2t + phi) with
# k = sqrt(7/32) and cosh(phi) = sqrt(8/7). Evaluated by hand to ten decimals.
THM1_II_F_AT_1 = 1.7384597329


def thm1_ii_closed_form(t: float) -> float:
    k = np.sqrt(7.0 / 32.0)
    phi = np.arccosh(np.sqrt(8.0 / 7.0))
    return float(np.sqrt(0.5 + k * np.cosh(2.0 * t + phi)))


def test_thm1_ii_matches_closed_form():
    """Test f(1) against the closed-form solution of the first-order equation."""
    assert thm1_ii_closed_form(1.0) == pytest.approx(THM1_II_F_AT_1, abs=1e-9)


def test_thm1_ii_f_at_1(thm1_ii_profile):
    assert thm1_ii_profile.evaluate(1.0) == pytest.approx(THM1_II_F_AT_1, abs=1e-8)


@pytest.mark.parametrize("family", FAMILIES)
def test_first_integral_drift(family):
    """Test |f'^2 - P(f)| stays below 1e-9 on [0, 3]."""
    solution = integrate_profile(profile_ode(family), t_max=3.0, tol=1e-9)
    assert solution.first_integral_residual <= 1e-9
    assert solution.sign_ok
    assert solution.to_summary().passed


def test_besse_a_slope_is_monotone_below_one():
    """Test f' increases and stays in [0, 1) for the (a) family with p = 3."""
    solution = integrate_profile(profile_ode("besse-a", p=3.0), t_max=3.0)
    assert np.all(solution.fp >= 0.0)
    assert np.all(solution.fp < 1.0)
    assert np.all(np.diff(solution.fp) > 0.0)


@pytest.mark.parametrize(
    "family,params,expected",
    [
        ("besse-c", {"p": 3.0}, -2.0),
        ("besse-b", {"p": 5.0}, 0.0),
        ("besse-a", {"p": 3.0}, 2.0),
        ("thm1-ii", {"m": 2.0}, -2.0),
    ],
)
def test_mu_of_family(family, params, expected):
    """Test the integrability constant carried by each family."""
    assert mu_of_family(family, params) == pytest.approx(expected)


def test_lambda_of_family():
    """Test the Einstein constants of the families."""
    assert lambda_of_family("besse-a", {"p": 3.0}) == 0.0
    assert lambda_of_family("besse-c", {"p": 3.0}) == -4.0
    assert lambda_of_family("thm1-iii", {"m": 2.0}) == -4.0


def test_fiber_solutions():
    """Test the exp, cosh and constant fiber solutions."""
    x1, x0 = np.array([1.0]), np.array([0.0])
    assert fiber_solution("exp").value(x1) == pytest.approx(np.e)
    cosh = fiber_solution("cosh")
    assert cosh.value(x0) == 1.0
    assert cosh.gradient(x0)[0] == 0.0
    assert fiber_solution("const", scale=2.0).value(np.array([3.7])) == 2.0


def test_fiber_solution_rejects_unknown_kind():
    """Test unknown fiber kinds are rejected."""
    with pytest.raises(ParameterError):
        fiber_solution("sinh")


def test_rejects_small_starting_value():
    """Test a <= sqrt(m/(m+2)) is rejected."""
    with pytest.raises(ParameterError):
        profile_ode("thm1-iii", m=2.0, a=0.5)


def test_rejects_unsupported_mu():
    """Test besse-d only accepts mu in {1-p, 0, p-1}."""
    with pytest.raises(ParameterError):
        profile_ode("besse-d", p=3.0, mu=0.5)


def test_rejects_unknown_family():
    """Test unknown family names are rejected."""
    with pytest.raises(ParameterError):
        profile_ode("besse-e")


def test_loss_of_positivity_raises():
    """Test a profile reaching zero raises an integration error."""
    ode = ProfileODE.from_terms("falling", [(1.0, 0.0)], 1.0, -1)
    with pytest.raises(IntegrationError):
        integrate_profile(ode, t_max=2.0)


def test_evaluation_outside_range(thm1_ii_profile):
    """Test evaluating past the integrated range, or at t < 0 of a non-even family."""
    with pytest.raises(InadmissiblePointError):
        thm1_ii_profile.evaluate(thm1_ii_profile.t_max + 1.0)
    with pytest.raises(InadmissiblePointError):
        thm1_ii_profile.evaluate(-0.5)


def test_csv_export(tmp_path, cosh_profile):
    """Test the CSV export writes one row per grid point."""
    path = cosh_profile.to_csv(tmp_path / "profile.csv")
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "f", "fp", "fpp", "residual"]
    assert len(rows) == len(cosh_profile.grid) + 1
    assert float(rows[1][1]) == pytest.approx(1.0)
