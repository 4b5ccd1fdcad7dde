from fractions import Fraction
from math import isnan

import numpy as np
import pytest

from app import kernel, multiplier, plancherel_probe
from app.exceptions import DegenerateInputError, DomainError
from app.models import QuadratureSpec, ScanRow

GENERIC_A = np.diag([0.5, 0.5, 0.0])

COARSE_SPHERE = QuadratureSpec(angular_nodes=4)


def _rows(masses):
    return [ScanRow(ell=ell, alpha=0, mass=m, model=1.0, ratio=m, error_est=0.0) for ell, m in masses]


def test_fit_recovers_an_exact_power_law():
    report = plancherel_probe.fit_scan(_rows([(2, 0.25), (0, 1.0), (1, 0.5)]), -1, "first_layer")
    assert [row.ell for row in report.rows] == [0, 1, 2]
    assert report.fitted_slope == pytest.approx(-1.0)
    assert report.residual == pytest.approx(0.0, abs=1e-12)
    assert report.two_sided
    assert report.implied_constant == 1.0


def test_fit_with_zero_mass_skips_the_slope():
    report = plancherel_probe.fit_scan(_rows([(0, 1.0), (1, 0.0)]), -1, "first_layer")
    assert isnan(report.fitted_slope)
    assert not report.two_sided


def test_fit_needs_two_points():
    with pytest.raises(DomainError):
        plancherel_probe.fit_scan(_rows([(0, 1.0)]), -1, "first_layer")


def test_scan_rows_carry_the_scaling_model(h1, bump):
    report = plancherel_probe.first_layer_scan(h1, bump, [0], [0, 1], COARSE_SPHERE)[0]
    norm_sq = multiplier.l2_norm(bump) ** 2
    dumped = [row.model_dump() for row in report.rows]
    assert set(dumped[0]) == {"ell", "alpha", "mass", "model", "ratio", "error_est"}
    assert [row["model"] for row in dumped] == pytest.approx([norm_sq, 0.5 * norm_sq])
    assert [row["ratio"] for row in dumped] == pytest.approx([row["mass"] / row["model"] for row in dumped])


def test_profile_gram_of_plain_profiles_is_diagonal():
    gram = plancherel_probe.profile_gram(5, 2, 0, "e", "e")
    assert np.allclose(gram - np.diag(np.diag(gram)), 0.0, atol=1e-10 * np.max(gram))
    assert np.all(np.diag(gram) > 0)


def test_second_layer_unweighted_mass_equals_first_layer(group43, bump):
    second = plancherel_probe.second_layer_mass_43(GENERIC_A, bump, 0, 0, COARSE_SPHERE)
    first, _ = kernel.first_layer_mass(group43, bump, 0, 0, COARSE_SPHERE)
    assert second > 0
    assert second == pytest.approx(first, rel=1e-8)


def test_second_layer_rejects_bad_input(bump):
    with pytest.raises(DomainError):
        plancherel_probe.second_layer_mass_43(GENERIC_A, bump, 0, 2)
    with pytest.raises(DegenerateInputError):
        plancherel_probe.second_layer_mass_43(np.eye(3), bump, 0, 1)


def test_second_layer_weighted_mass_is_positive(bump):
    assert plancherel_probe.second_layer_mass_43(GENERIC_A, bump, 0, 1, COARSE_SPHERE) > 0


def test_restriction_probe_is_heisenberg_only(group43, h1, bump):
    with pytest.raises(DomainError):
        plancherel_probe.restriction_scaling_probe(group43, bump, 1, [0])
    with pytest.raises(DomainError):
        plancherel_probe.restriction_scaling_probe(h1, bump, Fraction(3, 2), [0])


def test_restriction_probe_for_zero_multiplier(h1):
    rows = plancherel_probe.restriction_scaling_probe(h1, multiplier.constant(0.0, 4.0), 1, [0, 1])
    assert [row.lower_bound for row in rows] == [0.0, 0.0]
    assert rows[0].p == "1"


@pytest.mark.slow
def test_heisenberg_first_layer_window(h1):
    F = multiplier.smooth_bump(0.5, 2.0)
    reports = plancherel_probe.first_layer_scan(h1, F, (0, 1, 2), range(0, 5))
    slopes = [reports[alpha].fitted_slope for alpha in (0, 1, 2)]
    assert slopes[0] == pytest.approx(-1.0, abs=0.25)
    assert slopes == sorted(slopes)
    for alpha, measured in ((1, -0.23), (2, 0.99)):
        assert slopes[alpha] <= reports[alpha].slope_target + 0.25
        assert slopes[alpha] == pytest.approx(measured, abs=0.1)
    assert all(row.error_est < 1e-4 for report in reports.values() for row in report.rows)


@pytest.mark.slow
def test_43_first_layer_window(group43, bump):
    reports = plancherel_probe.first_layer_scan(group43, bump, (0, 1), range(0, 4))
    assert reports[0].fitted_slope == pytest.approx(-3.0, abs=0.3)
    assert reports[0].fitted_slope < reports[1].fitted_slope <= reports[1].slope_target + 0.3
    assert reports[1].fitted_slope == pytest.approx(-2.11, abs=0.1)


@pytest.mark.slow
def test_second_layer_window(group43, bump):
    report = plancherel_probe.second_layer_scan_43(GENERIC_A, bump, 1, range(0, 4), v=[0.0, 0.0, 1.0])
    assert report.route == "second_layer"
    assert all(row.error_est <= plancherel_probe.FD_TOLERANCE for row in report.rows)
    assert report.fitted_slope <= report.slope_target + 0.3
    assert report.fitted_slope == pytest.approx(-1.39, abs=0.1)
    for ell in (0, 2):
        second = plancherel_probe.second_layer_mass_43(GENERIC_A, bump, ell, 0)
        first, _ = kernel.first_layer_mass(group43, bump, ell, 0)
        assert second == pytest.approx(first, rel=1e-8)


@pytest.mark.slow
def test_restriction_probe_respects_the_l2_bound(h1):
    F = multiplier.smooth_bump(0.5, 2.0)
    rows = plancherel_probe.restriction_scaling_probe(h1, F, 2, [0])
    assert 0 < rows[0].lower_bound
    assert rows[0].ratio < 1.25
    ones = plancherel_probe.restriction_scaling_probe(h1, F, 1, [0])
    assert ones[0].lower_bound > 0
    assert np.isfinite(ones[0].ratio)
