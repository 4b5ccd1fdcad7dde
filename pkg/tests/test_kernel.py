from math import pi

import numpy as np
import pytest
from scipy.integrate import quad as integrate

from app import kernel, multiplier, spectral
from app.exceptions import DimensionMismatchError, DomainError
from app.group_core import Point
from app.models import QuadratureSpec

COARSE_SPHERE = QuadratureSpec(angular_nodes=4)


def test_enumerate_k_single_block(h2):
    dec = spectral.decompose_j(h2, [1.0])
    assert kernel.enumerate_k(dec, 6.0) == [(0,), (1,), (2,)]
    assert kernel.eigenvalue_lambda(dec, (2,)) == pytest.approx(6.0)


def test_enumerate_k_two_blocks(group43):
    dec = spectral.decompose_j(group43, [1.0, 0.0, 0.0])
    assert dec.b == pytest.approx([1.5, 0.5])
    assert kernel.enumerate_k(dec, 5.0) == [(0, 0), (0, 1), (0, 2), (0, 3), (1, 0)]
    with pytest.raises(DimensionMismatchError):
        kernel.eigenvalue_lambda(dec, (0,))


def test_ell0_heisenberg(h1):
    assert kernel.ell0(h1, (0.25, 4.0)) == 3
    assert kernel.ell0(h1, (-1.0, 0.0)) is None


def test_multinomial_terms():
    terms = sorted(kernel.multinomial_terms(2, 2), key=lambda t: t[1])
    assert terms == [(1, (0, 2)), (2, (1, 1)), (1, (2, 0))]


@pytest.mark.parametrize("group", ["h1", "h2", "group43"])
def test_unweighted_mass_matches_plancherel_closed_sum(group, bump, request):
    spec = request.getfixturevalue(group)
    mass, est = kernel.first_layer_mass(spec, bump, 0, 0, COARSE_SPHERE)
    closed = kernel.plancherel_closed_sum(spec, bump, 0, COARSE_SPHERE)
    assert mass > 0
    assert mass == pytest.approx(closed, rel=1e-10)
    assert est < 1e-4


def test_weighted_mass_is_positive_and_zero_for_zero_multiplier(h1, bump):
    assert kernel.weighted_l2_mass_first_layer(h1, bump, 1, 1) > 0
    zero = multiplier.constant(0.0, 4.0)
    assert kernel.first_layer_mass(h1, zero, 0, 1) == (0.0, 0.0)


def test_support_at_zero_needs_a_cutoff(h1):
    F = multiplier.bochner_riesz(1.0, 1.0)
    with pytest.raises(DomainError):
        kernel.eval_kernel(h1, F, None, Point.identity(h1))
    with pytest.raises(DomainError):
        kernel.first_layer_mass(h1, F, None, 0)
    assert kernel.first_layer_mass(h1, F, 0, 0)[0] > 0


def test_heisenberg_kernel_at_origin(h1, bump, quad):
    values, k_terms = kernel.kernel_values(h1, bump, None, [[0.0, 0.0]], [[0.0]], quad, node_factor=2)
    moment, _ = integrate(lambda s: s * float(bump(s)), 1.0, 3.0, limit=200)
    expected = 2.0 / (2 * pi) ** 2 * (pi**2 / 8) * moment
    assert k_terms == 21
    assert values[0].real == pytest.approx(expected, rel=1e-5)
    assert abs(values[0].imag) < 1e-10 * abs(expected)


def test_uncut_mass_matches_heisenberg_closed_form(h1, bump):
    mass, est = kernel.first_layer_mass(h1, bump, None, 0)
    moment, _ = integrate(lambda s: s * float(bump(s)) ** 2, 1.0, 3.0, limit=200)
    assert mass == pytest.approx(2.0 / (2 * pi) ** 2 * (pi**2 / 8) * moment, rel=1e-5)
    assert est < 1e-4


def test_uncut_kernel_is_stable_under_cap_doubling(h1, bump):
    point = Point.of([0.4, -0.2], [0.3])
    base = kernel.eval_kernel(h1, bump, None, point)
    wider = kernel.eval_kernel(h1, bump, None, point, QuadratureSpec().cap_doubled())
    assert wider.k_terms == 41
    assert wider.value == pytest.approx(base.value, rel=1e-5)
    assert base.quad_error_est < 1e-4


def test_uncut_window_starts_where_the_lattice_is_complete(h1, bump, quad):
    dec = spectral.decompose_j(h1, [1.0])
    rho_lo, rho_hi, lam, mask = kernel.rho_window(None, bump, dec, quad)
    assert rho_lo == pytest.approx(3.0 / 41.0)
    assert rho_hi == pytest.approx(3.0)
    assert float(lam[mask].max()) * rho_lo >= bump.support[1] - 1e-12
    rho, w = kernel.radial_nodes(None, bump, 1, (rho_lo, rho_hi, lam, mask), quad.radial_nodes)
    assert rho[0] == rho_lo and w[0] == pytest.approx(rho_lo)
    assert np.sum(w) == pytest.approx(rho_hi, rel=1e-12)


def test_eval_kernel_reports_quadrature_error(h1, bump):
    result = kernel.eval_kernel(h1, bump, None, Point.of([0.2, 0.1], [0.05]))
    assert result.quad_error_est < 1e-4
    assert abs(result.imag) < 1e-8 * abs(result.value)


def _points_near_origin(spec, count=20, seed=5):
    rng = np.random.default_rng(seed)
    return [Point.of(0.3 * rng.standard_normal(spec.d1), 0.1 * rng.standard_normal(spec.d2)) for _ in range(count)]


@pytest.mark.parametrize("t", [0.5, 1.5, 2.0])
def test_dilation_covariance(h1, bump, t):
    assert kernel.dilation_covariance_check(h1, bump, t, _points_near_origin(h1)) < 1e-5


@pytest.mark.slow
@pytest.mark.parametrize("t", [0.5, 2.0])
def test_dilation_covariance_on_the_43_group(group43, bump, t):
    points = _points_near_origin(group43)
    assert kernel.dilation_covariance_check(group43, bump, t, points, COARSE_SPHERE) < 1e-5


def test_kernel_table_agrees_with_pointwise_values(h1, bump):
    table = kernel.kernel_table(h1, bump, 0, [0.0, 0.5], [0.0, 0.3])
    assert table.values.shape == (2, 2)
    single, _ = kernel.kernel_values(h1, bump, 0, [[0.5, 0.0]], [[0.3]])
    assert table.values[1, 1] == pytest.approx(single[0], rel=1e-6)


def test_kernel_table_needs_one_dimensional_centre(group43, bump):
    with pytest.raises(DomainError):
        kernel.kernel_table(group43, bump, 0, [0.0], [[0.0]])


def test_v_form_vanishes_outside_the_cutoff(h1, bump):
    assert np.all(kernel.v_form(h1, bump, 0, [[0.1, 0.2]], [5.0]) == 0.0)
    values = kernel.v_form(h1, multiplier.smooth_bump(0.5, 2.5), 0, [[0.0, 0.0], [0.3, 0.0]], [1.0])
    assert values.shape == (2,)
    assert values[0] != 0.0


def test_point_dimensions_are_checked(h1, bump):
    with pytest.raises(DimensionMismatchError):
        kernel.kernel_values(h1, bump, 0, [[0.0, 0.0, 0.0]], [[0.0]])
